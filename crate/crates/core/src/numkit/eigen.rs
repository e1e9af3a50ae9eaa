//! Symmetric eigenvalues.
//!
//! Two independent routes are provided. [`sym_eig`] runs cyclic Jacobi
//! rotations and returns the whole spectrum; it is the reference. The
//! certificate searches only need the largest eigenvalue many times over, so
//! [`max_eigenvalue`] reduces to tridiagonal form with Householder reflectors
//! and locates the top eigenvalue by Sturm-sequence bisection, which is an
//! order of magnitude cheaper on the ~150x150 matrices that show up there.

use serde::{Deserialize, Serialize};

use super::{Matrix, NumError};

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymEigResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub max_eigenvalue: f64,
}

impl SymEigResult {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }
}

fn check_square_finite(m: &Matrix) -> Result<(), NumError> {
    if !m.is_square() {
        return Err(NumError::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(NumError::NonFinite);
    }
    Ok(())
}

/// Eigenvalues of the symmetric part of `m` by cyclic Jacobi.
pub fn sym_eig(m: &Matrix) -> Result<SymEigResult, NumError> {
    check_square_finite(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigResult { eigenvalues: vec![], max_eigenvalue: f64::NAN });
    }
    let mut a = m.sym();
    let total = a.frobenius().powi(2);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-32 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() < 1e-300 || apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigenvalues.sort_by(f64::total_cmp);
    let max_eigenvalue = *eigenvalues.last().unwrap();
    Ok(SymEigResult { eigenvalues, max_eigenvalue })
}

/// Tridiagonal form `(diagonal, off-diagonal)` of the symmetric part of `m`.
fn tridiagonalize(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows();
    let mut a = m.sym();
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let xnorm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        for i in 0..len {
            v[i] = a[(k + 1 + i, k)];
        }
        v[0] -= alpha;
        let vnorm = v[..len].iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            off[k] = x0;
            continue;
        }
        for x in &mut v[..len] {
            *x /= vnorm;
        }
        // p = A22 v, r = vᵀ p, w = p − r v; A22 ← A22 − 2(v wᵀ + w vᵀ)
        for (i, pi) in p[..len].iter_mut().enumerate() {
            let row = &a.row(k + 1 + i)[k + 1..];
            *pi = row.iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
        }
        let r: f64 = p[..len].iter().zip(&v[..len]).map(|(x, y)| x * y).sum();
        for (pi, vi) in p[..len].iter_mut().zip(&v[..len]) {
            *pi -= r * vi;
        }
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            for j in 0..=i {
                let upd = 2.0 * (vi * p[j] + wi * v[j]);
                a[(k + 1 + i, k + 1 + j)] -= upd;
                if i != j {
                    a[(k + 1 + j, k + 1 + i)] -= upd;
                }
            }
        }
        off[k] = alpha;
    }
    if n >= 2 {
        off[n - 2] = a[(n - 1, n - 2)];
    }
    let diag = (0..n).map(|i| a[(i, i)]).collect();
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of the symmetric part of `m` (Householder + bisection).
pub fn max_eigenvalue(m: &Matrix) -> Result<f64, NumError> {
    check_square_finite(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(f64::NAN);
    }
    if n == 1 {
        return Ok(m[(0, 0)]);
    }
    let (diag, off) = tridiagonalize(m);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE.max(scale * 1e-300);
    lo -= scale * 1e-14;
    hi += scale * 1e-14;
    // invariant: count(lo) ≤ n−1, count(hi) = n
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if sturm_count(&diag, &off, mid, pivmin) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64, NumError> {
    Ok(-max_eigenvalue(&m.scale(-1.0))?)
}

/// Spectral norm `‖M‖₂ = √λ_max(MᵀM)`.
pub fn spectral_norm(m: &Matrix) -> Result<f64, NumError> {
    let gram = if m.rows() < m.cols() { m.mul(&m.transpose()) } else { m.tmul(m) };
    Ok(max_eigenvalue(&gram)?.max(0.0).sqrt())
}
