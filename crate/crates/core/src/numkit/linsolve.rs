use super::{Matrix, NumError};

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self, NumError> {
        if !a.is_square() {
            return Err(NumError::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(NumError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = a.max_abs() * f64::EPSILON * n.max(1) as f64;
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
                .unwrap();
            let pval = lu[(piv, k)];
            if pval.abs() <= tiny || pval == 0.0 {
                return Err(NumError::Singular { pivot: k, value: pval });
            }
            if piv != k {
                perm.swap(k, piv);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pval;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix, NumError> {
        if b.rows() != self.dim() {
            return Err(NumError::Dimension(format!(
                "rhs has {} rows, system has {}",
                b.rows(),
                self.dim()
            )));
        }
        let bt = b.transpose();
        let mut xt = Matrix::zeros(b.cols(), b.rows());
        for j in 0..b.cols() {
            let col = self.solve_vec(bt.row(j));
            xt.set_block(j, 0, &Matrix::from_vec(1, col.len(), col)?);
        }
        Ok(xt.transpose())
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.dim())).expect("identity has matching rows")
    }
}

/// Solves `A X = B`.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix, NumError> {
    Lu::factor(a)?.solve(b)
}

/// Cholesky factor `L` with `A = L Lᵀ` for symmetric positive definite `A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self, NumError> {
        if !a.is_square() {
            return Err(NumError::Dimension("Cholesky needs a square matrix".into()));
        }
        let n = a.rows();
        let tiny = a.max_abs() * f64::EPSILON * n.max(1) as f64;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= tiny || !d.is_finite() {
                return Err(NumError::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.l[(i, k)] * y[k]).sum();
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.l[(k, i)] * y[k]).sum();
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve_vec(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Rank by Gaussian elimination with full pivoting and relative tolerance `tol`.
pub fn rank(a: &Matrix, tol: f64) -> usize {
    let mut m = a.clone();
    let (rows, cols) = m.shape();
    let scale = m.max_abs();
    if scale == 0.0 {
        return 0;
    }
    let mut r = 0;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, 0.0);
        for i in k..rows {
            for j in k..cols {
                if m[(i, j)].abs() > best.2 {
                    best = (i, j, m[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol * scale {
            break;
        }
        let (pi, pj, _) = best;
        for j in 0..cols {
            let t = m[(k, j)];
            m[(k, j)] = m[(pi, j)];
            m[(pi, j)] = t;
        }
        for i in 0..rows {
            let t = m[(i, k)];
            m[(i, k)] = m[(i, pj)];
            m[(i, pj)] = t;
        }
        for i in k + 1..rows {
            let f = m[(i, k)] / m[(k, k)];
            for j in k..cols {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_scalar() {
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(solve_linear(&Matrix::identity(2), &b).unwrap(), b);
        let x = solve_linear(&Matrix::from_diag(&[2.0]), &Matrix::column(&[4.0])).unwrap();
        assert_eq!(x[(0, 0)], 2.0);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = Matrix::zeros(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                a[(i, j)] = rng.gen_range(-1.0..1.0);
            }
            a[(i, i)] += 8.0;
        }
        let mut b = Matrix::zeros(8, 3);
        for i in 0..8 {
            for j in 0..3 {
                b[(i, j)] = rng.gen_range(-5.0..5.0);
            }
        }
        let x = solve_linear(&a, &b).unwrap();
        let resid = a.mul(&x).sub(&b).frobenius();
        assert!(resid <= 1e-9 * b.frobenius());
    }

    #[test]
    fn singular_names_pivot() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match solve_linear(&a, &Matrix::identity(2)) {
            Err(NumError::Singular { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_inverse() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let inv = Cholesky::factor(&a).unwrap().inverse();
        assert!(a.mul(&inv).sub(&Matrix::identity(2)).max_abs() < 1e-14);
        assert!(Cholesky::factor(&Matrix::from_diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn rank_counts_independent_rows() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(rank(&a, 1e-12), 2);
    }
}
