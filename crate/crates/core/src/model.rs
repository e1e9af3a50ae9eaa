//! Plant representations, zero-order-hold discretization and the shift to
//! error coordinates around a steady state.

use serde::{Deserialize, Serialize};

use crate::numkit::{self, expm, Matrix, NumError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("sampling step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("no steady input reaches x_ref: residual {residual:e} exceeds tolerance {tol:e}")]
    Inconsistent { residual: f64, tol: f64 },
}

/// `ẋ = A_c x + B_c u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPlant {
    pub a: Matrix,
    pub b: Matrix,
}

impl ContinuousPlant {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self, NumError> {
        if !a.is_square() || b.rows() != a.rows() {
            return Err(NumError::Dimension(format!(
                "plant needs A n x n and B n x m, got A {}x{} and B {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(NumError::NonFinite);
        }
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn derivative(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        numkit::add(&self.a.matvec(x), &self.b.matvec(u))
    }
}

/// `x_{k+1} = A_d x_k + B_d u_k` with sampling period `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePlant {
    pub a: Matrix,
    pub b: Matrix,
    pub step: f64,
}

impl DiscretePlant {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn next_state(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.a.matvec(x);
        self.b.matvec_acc(1.0, u, &mut out);
        out
    }
}

/// Exact zero-order-hold discretization.
///
/// `B_d` is read off the top-right block of `exp([[A, B], [0, 0]]·step)`.
pub fn discretize(plant: &ContinuousPlant, step: f64) -> Result<DiscretePlant, ModelError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(ModelError::NonPositiveStep(step));
    }
    let (n, m) = (plant.n(), plant.m());
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &plant.a);
    aug.set_block(0, n, &plant.b);
    let e = expm(&aug.scale(step))?;
    Ok(DiscretePlant { a: e.block(0, 0, n, n), b: e.block(0, n, n, m), step })
}

/// Steady operating point `(x_ref, u_ref)` with `A_c x_ref + B_c u_ref ≈ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyTarget {
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
    /// `‖A_c x_ref + B_c u_ref‖`.
    pub residual: f64,
}

/// Least-squares input holding the plant at `x_ref`.
pub fn steady_input(plant: &ContinuousPlant, x_ref: &[f64], tol: f64) -> Result<SteadyTarget, ModelError> {
    if x_ref.len() != plant.n() {
        return Err(NumError::Dimension(format!(
            "x_ref has {} entries, plant has {} states",
            x_ref.len(),
            plant.n()
        ))
        .into());
    }
    if !(tol > 0.0) {
        return Err(NumError::Domain(format!("tolerance must be positive, got {tol}")).into());
    }
    // normal equations BᵀB u = −Bᵀ A x_ref
    let rhs = plant.b.tmatvec(&plant.a.matvec(x_ref));
    let gram = plant.b.tmul(&plant.b);
    let u_ref: Vec<f64> = numkit::Lu::factor(&gram)?.solve_vec(&rhs).into_iter().map(|v| -v).collect();
    let residual = numkit::norm(&plant.derivative(x_ref, &u_ref));
    if residual > tol {
        return Err(ModelError::Inconsistent { residual, tol });
    }
    Ok(SteadyTarget { x_ref: x_ref.to_vec(), u_ref, residual })
}

impl SteadyTarget {
    /// `(x − x_ref, u − u_ref)`.
    pub fn to_error(&self, x: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (numkit::sub(x, &self.x_ref), numkit::sub(u, &self.u_ref))
    }

    /// Inverse of [`SteadyTarget::to_error`].
    pub fn from_error(&self, x_err: &[f64], u_err: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (numkit::add(x_err, &self.x_ref), numkit::add(u_err, &self.u_ref))
    }

    pub fn shift_state(&self, x: &[f64]) -> Vec<f64> {
        numkit::sub(x, &self.x_ref)
    }

    pub fn unshift_state(&self, x_err: &[f64]) -> Vec<f64> {
        numkit::add(x_err, &self.x_ref)
    }

    pub fn shift_input(&self, u: &[f64]) -> Vec<f64> {
        numkit::sub(u, &self.u_ref)
    }

    pub fn unshift_input(&self, u_err: &[f64]) -> Vec<f64> {
        numkit::add(u_err, &self.u_ref)
    }
}

/// Free-function form of [`SteadyTarget::to_error`].
pub fn to_error_coordinates(x: &[f64], u: &[f64], target: &SteadyTarget) -> (Vec<f64>, Vec<f64>) {
    target.to_error(x, u)
}

/// The DC-motor plant used throughout the examples.
pub fn dc_motor() -> ContinuousPlant {
    ContinuousPlant {
        a: Matrix::from_rows(&[vec![-4.0, -0.03], vec![0.75, -10.0]]).unwrap(),
        b: Matrix::from_rows(&[vec![2.0], vec![0.0]]).unwrap(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64) -> ContinuousPlant {
        ContinuousPlant::new(Matrix::from_diag(&[a]), Matrix::from_diag(&[b])).unwrap()
    }

    #[test]
    fn zero_dynamics_integrates_input() {
        let p = ContinuousPlant::new(Matrix::zeros(2, 2), Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap())
            .unwrap();
        let d = discretize(&p, 0.25).unwrap();
        assert_eq!(d.a, Matrix::identity(2));
        assert!((d.b[(0, 0)] - 0.25).abs() < 1e-15 && (d.b[(1, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn scalar_closed_form() {
        let d = discretize(&scalar(-1.0, 1.0), std::f64::consts::LN_2).unwrap();
        assert!((d.a[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((d.b[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dc_motor_matches_taylor_series() {
        let p = dc_motor();
        let h = 0.1;
        let d = discretize(&p, h).unwrap();
        // A_d = Σ (Ah)^k/k!, B_d = Σ A^k h^{k+1}/(k+1)! B, truncated at 30 terms
        let mut term = Matrix::identity(2);
        let mut a_sum = Matrix::identity(2);
        let mut b_int = Matrix::identity(2).scale(h);
        let mut int_term = Matrix::identity(2).scale(h);
        for k in 1..30 {
            term = term.mul(&p.a).scale(h / k as f64);
            a_sum = a_sum.add(&term);
            int_term = int_term.mul(&p.a).scale(h / (k + 1) as f64);
            b_int = b_int.add(&int_term);
        }
        let b_sum = b_int.mul(&p.b);
        assert!(d.a.sub(&a_sum).max_abs() < 1e-10);
        assert!(d.b.sub(&b_sum).max_abs() < 1e-10);
    }

    #[test]
    fn non_positive_step_rejected() {
        assert!(matches!(discretize(&dc_motor(), 0.0), Err(ModelError::NonPositiveStep(_))));
        assert!(matches!(discretize(&dc_motor(), -1.0), Err(ModelError::NonPositiveStep(_))));
    }

    #[test]
    fn steady_input_examples() {
        let p = dc_motor();
        let t = steady_input(&p, &[0.0, 0.0], 1e-9).unwrap();
        assert_eq!(t.u_ref, vec![0.0]);
        assert_eq!(t.residual, 0.0);

        let t = steady_input(&p, &[200.0 / 3.0, 5.0], 1e-9).unwrap();
        assert!((t.u_ref[0] - 133.4).abs() < 0.05, "u_ref = {}", t.u_ref[0]);

        // second state equation 0.75 x1 − 10 x2 = 0 violated by exactly 1
        let x = [200.0 / 3.0, 5.0 - 0.1];
        match steady_input(&p, &x, 1e-3) {
            Err(ModelError::Inconsistent { residual, .. }) => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn error_coordinates() {
        let p = dc_motor();
        let t = steady_input(&p, &[200.0 / 3.0, 5.0], 1e-9).unwrap();
        let (xe, ue) = t.to_error(&t.x_ref, &t.u_ref);
        assert_eq!(xe, vec![0.0, 0.0]);
        assert_eq!(ue, vec![0.0]);
        let (x, u) = t.from_error(&[1.5, -2.0], &[3.0]);
        let (xe, ue) = to_error_coordinates(&x, &u, &t);
        assert!((xe[0] - 1.5).abs() < 1e-12 && (xe[1] + 2.0).abs() < 1e-12 && (ue[0] - 3.0).abs() < 1e-12);
        // 160 − 133.408… ≈ 26.59
        let shifted = t.shift_input(&[160.0])[0];
        assert!((shifted - (160.0 - t.u_ref[0])).abs() < 1e-12);
        assert!((shifted - 26.6).abs() < 0.05);
    }

    #[test]
    fn semigroup_and_small_step_limit() {
        let p = dc_motor();
        let (a, b) = (0.037, 0.081);
        let dab = discretize(&p, a + b).unwrap();
        let prod = discretize(&p, a).unwrap().a.mul(&discretize(&p, b).unwrap().a);
        assert!(dab.a.sub(&prod).max_abs() < 1e-9);

        let h = 1e-8;
        let d = discretize(&p, h).unwrap();
        let da = d.a.sub(&Matrix::identity(2)).scale(1.0 / h);
        assert!(da.sub(&p.a).max_abs() < 1e-5);
        assert!(d.b.scale(1.0 / h).sub(&p.b).max_abs() < 1e-5);
    }
}
