//! The finite-horizon optimal control problem in matrix form.
//!
//! The decision vector stacks inputs before states,
//! `w = [u_0; …; u_{N−1}; x_1; …; x_N]`, and the problem is
//!
//! ```text
//! minimize ½ wᵀ P w   s.t.   G w + g0 ≤ 0,   C w + D x = 0,
//! ```
//!
//! where `C w + D x` stacks the dynamics residuals `x_{k+1} − A_h x_k − B_h u_k`
//! with `x_0 = x`. All quantities are in error coordinates, so `w = 0` is the
//! steady state and `g(0) = g0 < 0`.

use serde::{Deserialize, Serialize};

use crate::model::DiscretePlant;
use crate::numkit::{self, Cholesky, Matrix, NumError};

#[derive(Debug, thiserror::Error)]
pub enum OcpError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("equality constraint matrix C is rank deficient: C Cᵀ is singular ({0})")]
    RankDeficient(NumError),
    #[error("{0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Which block of `w` the state weight lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightOrder {
    /// Input weight on the `u` block, state weight on the `x` block.
    #[default]
    Physical,
    /// `blockdiag(state_weight·I_{nN}, input_weight·I_{mN})` applied to
    /// `w = [u; x]` as written, i.e. the first `nN` entries get the state weight.
    Literal,
}

/// How the weights enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveForm {
    /// `f(w) = ‖w‖²_W = wᵀ W w`, Hessian `2W`.
    #[default]
    WeightedNorm,
    /// `f(w) = ½ wᵀ W w`, Hessian `W`.
    HalfQuadratic,
}

/// Quadratic objective `f(w) = ½ wᵀ P w` with `P` the Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub p: Matrix,
    /// `λ_min(P)`.
    pub sigma: f64,
    /// `λ_max(P)`.
    pub rho: f64,
}

/// Block-diagonal objective Hessian aligned with `w = [u_{0:N−1}; x_{1:N}]`.
pub fn build_objective(
    state_weight: f64,
    input_weight: f64,
    n: usize,
    m: usize,
    horizon: usize,
    order: WeightOrder,
    form: ObjectiveForm,
) -> Result<Objective, OcpError> {
    if !(state_weight > 0.0) || !(input_weight > 0.0) {
        return Err(OcpError::Domain(format!(
            "weights must be positive, got state {state_weight}, input {input_weight}"
        )));
    }
    let scale = match form {
        ObjectiveForm::WeightedNorm => 2.0,
        ObjectiveForm::HalfQuadratic => 1.0,
    };
    let (first, first_len, second) = match order {
        WeightOrder::Physical => (input_weight, m * horizon, state_weight),
        WeightOrder::Literal => (state_weight, n * horizon, input_weight),
    };
    let nw = (n + m) * horizon;
    let diag: Vec<f64> = (0..nw).map(|i| scale * if i < first_len { first } else { second }).collect();
    let sigma = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let rho = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Objective { p: Matrix::from_diag(&diag), sigma, rho })
}

/// Dynamics equality `h(w; x) = C w + D x` for `w = [u_{0:N−1}; x_{1:N}]`.
pub fn build_equality(a_h: &Matrix, b_h: &Matrix, horizon: usize) -> Result<(Matrix, Matrix), OcpError> {
    if !a_h.is_square() || b_h.rows() != a_h.rows() {
        return Err(NumError::Dimension(format!(
            "model needs A n x n and B n x m, got {}x{} and {}x{}",
            a_h.rows(),
            a_h.cols(),
            b_h.rows(),
            b_h.cols()
        ))
        .into());
    }
    if horizon == 0 {
        return Err(OcpError::Domain("horizon must be at least 1".into()));
    }
    let (n, m) = (a_h.rows(), b_h.cols());
    let nw = (n + m) * horizon;
    let mut c = Matrix::zeros(n * horizon, nw);
    let mut d = Matrix::zeros(n * horizon, n);
    let neg_a = a_h.scale(-1.0);
    let neg_b = b_h.scale(-1.0);
    let ident = Matrix::identity(n);
    for k in 0..horizon {
        let row = k * n;
        c.set_block(row, k * m, &neg_b);
        c.set_block(row, m * horizon + k * n, &ident);
        if k == 0 {
            d.set_block(0, 0, &neg_a);
        } else {
            c.set_block(row, m * horizon + (k - 1) * n, &neg_a);
        }
    }
    Ok((c, d))
}

/// Upper bounds on every input of the horizon, `u_k ≤ upper` in error
/// coordinates, written as `G w + g0 ≤ 0`.
pub fn build_inequality(upper: &[f64], n: usize, horizon: usize) -> Result<(Matrix, Vec<f64>), OcpError> {
    if let Some((i, b)) = upper.iter().enumerate().find(|(_, b)| !(**b > 0.0)) {
        return Err(OcpError::Assumption(format!(
            "g(0) < 0 requires a positive shifted bound, input {i} has {b}"
        )));
    }
    let m = upper.len();
    let nw = (n + m) * horizon;
    let mut g = Matrix::zeros(m * horizon, nw);
    let mut g0 = Vec::with_capacity(m * horizon);
    for k in 0..horizon {
        for (j, b) in upper.iter().enumerate() {
            g[(k * m + j, k * m + j)] = 1.0;
            g0.push(-b);
        }
    }
    Ok((g, g0))
}

/// Equality projection `w ↦ K w + L x` onto `{w : C w + D x = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub k: Matrix,
    pub l: Matrix,
}

impl ProjectionPair {
    pub fn apply(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = self.k.matvec(w);
        self.l.matvec_acc(1.0, x, &mut out);
        out
    }
}

/// `K = I − Cᵀ(CCᵀ)⁻¹C`, `L = −Cᵀ(CCᵀ)⁻¹D`.
pub fn build_projection(c: &Matrix, d: &Matrix) -> Result<ProjectionPair, OcpError> {
    if c.rows() != d.rows() {
        return Err(NumError::Dimension(format!("C has {} rows, D has {}", c.rows(), d.rows())).into());
    }
    let cct = c.mul(&c.transpose());
    let chol = Cholesky::factor(&cct).map_err(OcpError::RankDeficient)?;
    let inv = chol.inverse();
    let ct_inv = c.tmul(&inv);
    let k = Matrix::identity(c.cols()).sub(&ct_inv.mul(c));
    let l = ct_inv.mul(d).scale(-1.0);
    Ok(ProjectionPair { k, l })
}

/// The assembled problem.
#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    /// Prediction step Δτ.
    pub dtau: f64,
    pub objective: Objective,
    pub g: Matrix,
    pub g0: Vec<f64>,
    pub c: Matrix,
    pub d: Matrix,
    /// Picks `u_0` out of `w`.
    pub e: Matrix,
    /// Prediction model `(A_h, B_h)`.
    pub model: DiscretePlant,
    /// Number of leading rows of `(C, D)` that encode the dynamics.
    dynamics_rows: usize,
}

impl OcpSpec {
    /// Assembles the problem for the prediction model `model` (step Δτ).
    pub fn assemble(
        model: &DiscretePlant,
        horizon: usize,
        objective: Objective,
        shifted_upper: &[f64],
    ) -> Result<Self, OcpError> {
        let (n, m) = (model.n(), model.m());
        if shifted_upper.len() != m {
            return Err(NumError::Dimension(format!(
                "input bound has {} entries, plant has {m} inputs",
                shifted_upper.len()
            ))
            .into());
        }
        let (c, d) = build_equality(&model.a, &model.b, horizon)?;
        let (g, g0) = build_inequality(shifted_upper, n, horizon)?;
        let nw = (n + m) * horizon;
        if objective.p.shape() != (nw, nw) {
            return Err(NumError::Dimension(format!(
                "objective is {}x{}, decision vector has {nw} entries",
                objective.p.rows(),
                objective.p.cols()
            ))
            .into());
        }
        if !(objective.sigma > 0.0) || objective.sigma > objective.rho {
            return Err(OcpError::Assumption(format!(
                "objective must be strongly convex: sigma = {}, rho = {}",
                objective.sigma, objective.rho
            )));
        }
        let mut e = Matrix::zeros(m, nw);
        for j in 0..m {
            e[(j, j)] = 1.0;
        }
        Ok(Self {
            horizon,
            n,
            m,
            dtau: model.step,
            objective,
            g,
            g0,
            c,
            d,
            e,
            model: model.clone(),
            dynamics_rows: n * horizon,
        })
    }

    /// Appends linear equality rows `C_x w + D_x x = 0`.
    pub fn with_extra_equality(mut self, c_extra: &Matrix, d_extra: &Matrix) -> Result<Self, OcpError> {
        if c_extra.cols() != self.nw() || d_extra.cols() != self.n || c_extra.rows() != d_extra.rows() {
            return Err(NumError::Dimension("extra equality rows do not match the problem".into()).into());
        }
        self.c = Matrix::vstack(&[&self.c, c_extra])?;
        self.d = Matrix::vstack(&[&self.d, d_extra])?;
        Ok(self)
    }

    /// Appends inequality rows `G_x w + g0_x ≤ 0`; `g0_x` must be negative.
    pub fn with_extra_inequality(mut self, g_extra: &Matrix, g0_extra: &[f64]) -> Result<Self, OcpError> {
        if g_extra.cols() != self.nw() || g_extra.rows() != g0_extra.len() {
            return Err(NumError::Dimension("extra inequality rows do not match the problem".into()).into());
        }
        if let Some(v) = g0_extra.iter().find(|v| !(**v < 0.0)) {
            return Err(OcpError::Assumption(format!("g(0) < 0 fails for an extra row with offset {v}")));
        }
        self.g = Matrix::vstack(&[&self.g, g_extra])?;
        self.g0.extend_from_slice(g0_extra);
        Ok(self)
    }

    pub fn nw(&self) -> usize {
        (self.n + self.m) * self.horizon
    }

    pub fn n_mu(&self) -> usize {
        self.g.rows()
    }

    pub fn n_lambda(&self) -> usize {
        self.c.rows()
    }

    pub fn p(&self) -> &Matrix {
        &self.objective.p
    }

    pub fn sigma(&self) -> f64 {
        self.objective.sigma
    }

    pub fn rho(&self) -> f64 {
        self.objective.rho
    }

    pub fn has_extra_equalities(&self) -> bool {
        self.c.rows() > self.dynamics_rows
    }

    pub fn objective_value(&self, w: &[f64]) -> f64 {
        0.5 * self.objective.p.quad_form(w)
    }

    pub fn grad_f(&self, w: &[f64]) -> Vec<f64> {
        self.objective.p.matvec(w)
    }

    /// `g(w) = G w + g0`.
    pub fn ineq(&self, w: &[f64]) -> Vec<f64> {
        numkit::add(&self.g.matvec(w), &self.g0)
    }

    /// `h(w; x) = C w + D x`.
    pub fn eq_residual(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let mut h = self.c.matvec(w);
        self.d.matvec_acc(1.0, x, &mut h);
        h
    }

    /// `E w`.
    pub fn input(&self, w: &[f64]) -> Vec<f64> {
        w[..self.m].to_vec()
    }

    /// Input sequence `u_{0:N−1}` part of `w`.
    pub fn inputs<'a>(&self, w: &'a [f64]) -> &'a [f64] {
        &w[..self.m * self.horizon]
    }

    pub fn projection(&self) -> Result<ProjectionPair, OcpError> {
        build_projection(&self.c, &self.d)
    }

    /// Forward simulation of the prediction model: the unique `w` with
    /// `h(w; x) = 0` for the given input sequence.
    pub fn rollout(&self, inputs: &[f64], x: &[f64]) -> Vec<f64> {
        let (n, m, hz) = (self.n, self.m, self.horizon);
        assert_eq!(inputs.len(), m * hz);
        let mut w = inputs.to_vec();
        w.reserve(n * hz);
        let mut xk = x.to_vec();
        for k in 0..hz {
            xk = self.model.next_state(&xk, &inputs[k * m..(k + 1) * m]);
            w.extend_from_slice(&xk);
        }
        w
    }

    /// Condenses the dynamics out of the problem.
    pub fn condense(&self) -> Result<CondensedQp, OcpError> {
        condense(self)
    }
}

/// Inputs-only problem `min ½UᵀHU + (Q x)ᵀU  s.t.  G_u U + G_x x + g0 ≤ 0`
/// obtained by substituting `w = S U + T x`.
#[derive(Debug, Clone)]
pub struct CondensedQp {
    pub h: Matrix,
    pub q_map: Matrix,
    pub g_u: Matrix,
    pub g_map: Matrix,
    pub g0_u: Vec<f64>,
    /// `w = s_map U + t_map x`.
    pub s_map: Matrix,
    pub t_map: Matrix,
    pub m: usize,
}

impl CondensedQp {
    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    pub fn n_constraints(&self) -> usize {
        self.g_u.rows()
    }

    pub fn linear_term(&self, x: &[f64]) -> Vec<f64> {
        self.q_map.matvec(x)
    }

    /// Offset of the constraints at state `x`: `G_x x + g0`.
    pub fn offset(&self, x: &[f64]) -> Vec<f64> {
        numkit::add(&self.g_map.matvec(x), &self.g0_u)
    }

    pub fn full_vector(&self, u_seq: &[f64], x: &[f64]) -> Vec<f64> {
        let mut w = self.s_map.matvec(u_seq);
        self.t_map.matvec_acc(1.0, x, &mut w);
        w
    }
}

/// States `x_{1:N} = Φ x_0 + Γ u_{0:N−1}` substituted into the objective and
/// the inequality.
pub fn condense(spec: &OcpSpec) -> Result<CondensedQp, OcpError> {
    if spec.has_extra_equalities() {
        return Err(OcpError::Unsupported(
            "condensing handles the dynamics equalities only".into(),
        ));
    }
    let (n, m, hz) = (spec.n, spec.m, spec.horizon);
    let (a, b) = (&spec.model.a, &spec.model.b);
    let mu = m * hz;
    let nw = spec.nw();

    let mut s_map = Matrix::zeros(nw, mu);
    let mut t_map = Matrix::zeros(nw, n);
    s_map.set_block(0, 0, &Matrix::identity(mu));
    // A^k B blocks
    let mut powers_b = vec![b.clone()];
    for k in 1..hz {
        let next = a.mul(&powers_b[k - 1]);
        powers_b.push(next);
    }
    let mut a_pow = Matrix::identity(n);
    for k in 0..hz {
        a_pow = a.mul(&a_pow);
        t_map.set_block(mu + k * n, 0, &a_pow);
        for j in 0..=k {
            s_map.set_block(mu + k * n, j * m, &powers_b[k - j]);
        }
    }
    let p = spec.p();
    let ps = p.mul(&s_map);
    let h = s_map.tmul(&ps).sym();
    let q_map = ps.tmul(&t_map);
    let g_u = spec.g.mul(&s_map);
    let g_map = spec.g.mul(&t_map);
    Cholesky::factor(&h).map_err(|e| OcpError::Assumption(format!("condensed Hessian is not positive definite: {e}")))?;
    Ok(CondensedQp { h, q_map, g_u, g_map, g0_u: spec.g0.clone(), s_map, t_map, m })
}
