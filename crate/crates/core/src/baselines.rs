//! Reference controllers: an exact QP solve per sampling period and a
//! continuation/GMRES tracker of the optimality residual.

use serde::{Deserialize, Serialize};

use crate::numkit::{self, Cholesky, Lu, Matrix, NumError};
use crate::ocp::CondensedQp;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("QP Hessian is not positive definite: {0}")]
    NotConvex(NumError),
    #[error("QP is infeasible: constraint {constraint} cannot be satisfied")]
    Infeasible { constraint: usize },
    #[error("active-set iteration limit {limit} reached; last active sets: {trace:?}")]
    Cycling { limit: usize, trace: Vec<Vec<usize>> },
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// `min ½uᵀHu + qᵀu  s.t.  A_eq u = b_eq,  A_in u ≤ b_in`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: Matrix,
    pub q: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub a_in: Matrix,
    pub b_in: Vec<f64>,
}

impl QpProblem {
    pub fn new(h: Matrix, q: Vec<f64>) -> Self {
        let n = q.len();
        Self { h, q, a_eq: Matrix::zeros(0, n), b_eq: vec![], a_in: Matrix::zeros(0, n), b_in: vec![] }
    }

    pub fn with_equalities(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * self.h.quad_form(u) + numkit::dot(&self.q, u)
    }

    /// Largest of stationarity, primal infeasibility, dual infeasibility and
    /// complementarity, all in the max norm.
    pub fn kkt_residual(&self, u: &[f64], mult_in: &[f64], mult_eq: &[f64]) -> f64 {
        let mut grad = self.h.matvec(u);
        numkit::axpy(1.0, &self.q, &mut grad);
        self.a_in.tmatvec_acc(1.0, mult_in, &mut grad);
        self.a_eq.tmatvec_acc(1.0, mult_eq, &mut grad);
        let stat = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let slack = numkit::sub(&self.a_in.matvec(u), &self.b_in);
        let prim_in = slack.iter().fold(0.0f64, |a, v| a.max(*v));
        let prim_eq = numkit::sub(&self.a_eq.matvec(u), &self.b_eq).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dual = mult_in.iter().fold(0.0f64, |a, v| a.max(-v));
        let comp = mult_in.iter().zip(&slack).fold(0.0f64, |a, (m, s)| a.max((m * s).abs()));
        stat.max(prim_in).max(prim_eq).max(dual).max(comp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub u_seq: Vec<f64>,
    /// Indices of active inequality rows, in order of entry.
    pub active_set: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Dual active-set method of Goldfarb and Idnani.
///
/// Starts from the unconstrained minimizer, adds the equalities, then adds
/// the most violated inequality (lowest index on ties) until none is
/// violated by more than `tol`. No feasible starting point is needed.
pub fn solve_qp(p: &QpProblem, tol: f64) -> Result<QpSolution, BaselineError> {
    let n = p.dim();
    let (n_eq, n_in) = (p.a_eq.rows(), p.a_in.rows());
    if p.h.shape() != (n, n) || p.a_eq.cols() != n || p.a_in.cols() != n || p.b_in.len() != n_in || p.b_eq.len() != n_eq
    {
        return Err(NumError::Dimension("QP data dimensions disagree".into()).into());
    }
    let chol = Cholesky::factor(&p.h).map_err(BaselineError::NotConvex)?;
    let hinv = chol.inverse();
    let mut u: Vec<f64> = chol.solve_vec(&p.q).into_iter().map(|v| -v).collect();

    // Constraint k as (row, rhs) of the input data; equalities first.
    let row = |k: usize| -> (&[f64], f64) {
        if k < n_eq {
            (p.a_eq.row(k), p.b_eq[k])
        } else {
            (p.a_in.row(k - n_eq), p.b_in[k - n_eq])
        }
    };
    // Internally every constraint reads σ·rowᵀu ≥ σ·rhs: σ = −1 for the
    // inequalities, ±1 for equalities depending on the side they enter from.
    // Stationarity is H u + q = Σ mult_j σ_j row_j.
    let mut active: Vec<(usize, f64)> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let limit = 50 * (n + n_eq + n_in + 1);
    let mut trace: Vec<Vec<usize>> = Vec::new();
    let mut iterations = 0;

    let mut pending_eq = 0usize;
    loop {
        let entering = if pending_eq < n_eq {
            let k = pending_eq;
            pending_eq += 1;
            let (a, b) = row(k);
            Some((k, if numkit::dot(a, &u) - b > 0.0 { -1.0 } else { 1.0 }))
        } else {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n_in {
                let k = n_eq + i;
                if active.iter().any(|(a, _)| *a == k) {
                    continue;
                }
                let (a, b) = row(k);
                let viol = numkit::dot(a, &u) - b;
                if viol > tol * (1.0 + b.abs()) && best.is_none_or(|(_, v)| viol > v) {
                    best = Some((k, viol));
                }
            }
            best.map(|(k, _)| (k, -1.0))
        };
        let Some((kp, sign)) = entering else { break };
        let np: Vec<f64> = row(kp).0.iter().map(|v| sign * v).collect();
        let bp = sign * row(kp).1;
        let mut mult_p = 0.0;

        loop {
            iterations += 1;
            if iterations > limit {
                return Err(BaselineError::Cycling { limit, trace });
            }
            trace.push(active.iter().map(|(k, _)| *k).collect());
            if trace.len() > 8 {
                trace.remove(0);
            }
            // z = H⁻¹(n_p − N r), r = (NᵀH⁻¹N)⁻¹NᵀH⁻¹n_p
            let hn = hinv.matvec(&np);
            let cols: Vec<Vec<f64>> = active.iter().map(|(k, s)| row(*k).0.iter().map(|v| s * v).collect()).collect();
            let hcols: Vec<Vec<f64>> = cols.iter().map(|c| hinv.matvec(c)).collect();
            let r = if active.is_empty() {
                vec![]
            } else {
                let na = cols.len();
                let mut m = Matrix::zeros(na, na);
                for i in 0..na {
                    for j in 0..na {
                        m[(i, j)] = numkit::dot(&cols[i], &hcols[j]);
                    }
                }
                let rhs: Vec<f64> = hcols.iter().map(|hc| numkit::dot(hc, &np)).collect();
                Lu::factor(&m)?.solve_vec(&rhs)
            };
            let mut z = hn.clone();
            for (j, hc) in hcols.iter().enumerate() {
                numkit::axpy(-r[j], hc, &mut z);
            }
            // dual step: first inequality multiplier to reach zero, lowest index on ties
            let mut t1 = f64::INFINITY;
            let mut drop: Option<usize> = None;
            for (j, (k, _)) in active.iter().enumerate() {
                if *k >= n_eq && r[j] > 0.0 {
                    let t = mult[j] / r[j];
                    if t < t1 || (t == t1 && drop.is_some_and(|d| active[d].0 > *k)) {
                        t1 = t;
                        drop = Some(j);
                    }
                }
            }
            let zn = numkit::dot(&z, &np);
            let z_zero = numkit::norm(&z) <= 1e-14 * (1.0 + numkit::norm(&hn)) || zn <= 0.0;
            if z_zero && t1.is_infinite() {
                return Err(BaselineError::Infeasible { constraint: if kp < n_eq { kp } else { kp - n_eq } });
            }
            let t2 = if z_zero { f64::INFINITY } else { ((bp - numkit::dot(&np, &u)) / zn).max(0.0) };
            let t = t1.min(t2);
            if !z_zero {
                numkit::axpy(t, &z, &mut u);
            }
            for (mj, rj) in mult.iter_mut().zip(&r) {
                *mj -= t * rj;
            }
            mult_p += t;
            if t2 <= t1 {
                active.push((kp, sign));
                mult.push(mult_p);
                break;
            }
            let d = drop.expect("partial step has a blocking constraint");
            active.remove(d);
            mult.remove(d);
        }
    }

    let mut mult_in = vec![0.0; n_in];
    let mut mult_eq = vec![0.0; n_eq];
    let mut active_set = Vec::new();
    for ((k, s), m) in active.iter().zip(&mult) {
        if *k < n_eq {
            mult_eq[*k] = -s * m;
        } else {
            mult_in[k - n_eq] = m.max(0.0);
            active_set.push(k - n_eq);
        }
    }
    let kkt_residual = p.kkt_residual(&u, &mult_in, &mult_eq);
    Ok(QpSolution {
        objective: p.objective(&u),
        u_seq: u,
        active_set,
        multipliers: mult_in,
        eq_multipliers: mult_eq,
        kkt_residual,
        iterations,
    })
}

/// The condensed problem at state `x` as a [`QpProblem`].
pub fn condensed_problem(qp: &CondensedQp, x: &[f64]) -> QpProblem {
    let b: Vec<f64> = qp.offset(x).into_iter().map(|v| -v).collect();
    QpProblem::new(qp.h.clone(), qp.linear_term(x)).with_inequalities(qp.g_u.clone(), b)
}

/// Exact minimizer of the condensed problem at state `x`.
pub fn qp_solve(qp: &CondensedQp, x: &[f64], tol: f64) -> Result<QpSolution, BaselineError> {
    solve_qp(&condensed_problem(qp, x), tol)
}

/// `φ(a, b) = a + b − √(a² + b²)`.
pub fn fischer_burmeister(a: f64, b: f64) -> f64 {
    a + b - a.hypot(b)
}

/// `F(ω; x) = [H U + Q x + G_uᵀν; φ(−g, ν)]` with `ω = [U; ν]`.
pub fn cgmres_residual(omega: &[f64], x: &[f64], qp: &CondensedQp) -> Vec<f64> {
    let nu_len = qp.n_constraints();
    let d = qp.dim();
    let (u, nu) = omega.split_at(d);
    debug_assert_eq!(nu.len(), nu_len);
    let mut stat = qp.h.matvec(u);
    qp.q_map.matvec_acc(1.0, x, &mut stat);
    qp.g_u.tmatvec_acc(1.0, nu, &mut stat);
    let mut g = qp.g_u.matvec(u);
    numkit::axpy(1.0, &qp.offset(x), &mut g);
    stat.extend(g.iter().zip(nu).map(|(gi, ni)| fischer_burmeister(-gi, *ni)));
    stat
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgmresState {
    pub omega: Vec<f64>,
    /// Last solution of the continuation equation.
    pub omega_dot: Vec<f64>,
    pub xi: f64,
    pub gmres_iters: usize,
    pub fd_step: f64,
    /// Steps where the Krylov least-squares problem was singular.
    pub warnings: usize,
}

impl CgmresState {
    /// `U` from the unconstrained condensed minimizer at `x`, `ν = 0`.
    pub fn init(qp: &CondensedQp, x: &[f64], xi: f64, gmres_iters: usize) -> Result<Self, BaselineError> {
        if !(xi > 0.0) || gmres_iters == 0 {
            return Err(BaselineError::Domain(format!("need ξ > 0 and k ≥ 1, got ξ = {xi}, k = {gmres_iters}")));
        }
        let chol = Cholesky::factor(&qp.h).map_err(BaselineError::NotConvex)?;
        let mut omega: Vec<f64> = chol.solve_vec(&qp.linear_term(x)).into_iter().map(|v| -v).collect();
        omega.extend(std::iter::repeat_n(0.0, qp.n_constraints()));
        let len = omega.len();
        Ok(Self { omega, omega_dot: vec![0.0; len], xi, gmres_iters, fd_step: 1e-6, warnings: 0 })
    }

    pub fn input(&self, m: usize) -> &[f64] {
        &self.omega[..m]
    }
}

/// One continuation step: solves `J ω̇ = −(ξF + ∂F/∂t)` with `k` GMRES
/// iterations and takes `ω ← ω + dt·ω̇`.
pub fn cgmres_step(state: &mut CgmresState, x: &[f64], x_pred: &[f64], dt: f64, qp: &CondensedQp) {
    let f0 = cgmres_residual(&state.omega, x, qp);
    let f_pred = cgmres_residual(&state.omega, x_pred, qp);
    let rhs: Vec<f64> = f0.iter().zip(&f_pred).map(|(f, fp)| -state.xi * f - (fp - f) / dt).collect();
    let omega = state.omega.clone();
    let om_norm = numkit::norm(&omega);
    let fd = state.fd_step;
    let jv = |v: &[f64]| -> Vec<f64> {
        let vn = numkit::norm(v);
        if vn == 0.0 {
            return vec![0.0; v.len()];
        }
        let h = fd * (1.0 + om_norm) / vn;
        let mut probe = omega.clone();
        numkit::axpy(h, v, &mut probe);
        let fp = cgmres_residual(&probe, x, qp);
        fp.iter().zip(&f0).map(|(a, b)| (a - b) / h).collect()
    };
    // Cold start: with k = 1 a stale ω̇ guess lets the residual grow by
    // about ξΔt per step on stiff problems; from zero the step only removes
    // the component of F along JF.
    let start = vec![0.0; rhs.len()];
    match gmres(jv, &rhs, &start, state.gmres_iters) {
        Some(sol) => {
            numkit::axpy(dt, &sol, &mut state.omega);
            state.omega_dot = sol;
        }
        None => state.warnings += 1,
    }
}

/// `k` iterations of GMRES from `x0`. `None` when the Krylov least-squares
/// problem is singular.
pub fn gmres<F>(mut apply: F, b: &[f64], x0: &[f64], k: usize) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let ax0 = apply(x0);
    let r0 = numkit::sub(b, &ax0);
    let beta = numkit::norm(&r0);
    if beta == 0.0 {
        return Some(x0.to_vec());
    }
    let mut basis = vec![numkit::scaled(&r0, 1.0 / beta)];
    // Hessenberg, (k+1) x k
    let mut hess = Matrix::zeros(k + 1, k);
    let mut used = k;
    for j in 0..k {
        let mut v = apply(&basis[j]);
        for i in 0..=j {
            let hij = numkit::dot(&v, &basis[i]);
            hess[(i, j)] = hij;
            numkit::axpy(-hij, &basis[i], &mut v);
        }
        let vn = numkit::norm(&v);
        hess[(j + 1, j)] = vn;
        if vn <= 1e-14 * beta {
            // happy breakdown: the Krylov space contains the solution
            used = j + 1;
            break;
        }
        basis.push(numkit::scaled(&v, 1.0 / vn));
    }
    // least squares min ‖β e₁ − H y‖ by normal equations on the used block
    let h = hess.block(0, 0, used + 1, used);
    let mut e1 = vec![0.0; used + 1];
    e1[0] = beta;
    let hth = h.tmul(&h);
    let rhs = h.tmatvec(&e1);
    let y = Lu::factor(&hth).ok()?.solve_vec(&rhs);
    let mut x = x0.to_vec();
    for (i, yi) in y.iter().enumerate() {
        numkit::axpy(*yi, &basis[i], &mut x);
    }
    Some(x)
}
