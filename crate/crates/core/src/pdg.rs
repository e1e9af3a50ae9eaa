//! Primal-dual gradient controller.
//!
//! The controller state `(w, μ, λ)` follows a discretized primal-dual
//! gradient flow of the augmented Lagrangian of the horizon problem. Each
//! sampling period takes one step with a step-size coefficient `γ ∈ (0, 1]`
//! chosen by backtracking on the Lyapunov function
//!
//! ```text
//! V = ½(‖w‖² + ‖μ‖² + ‖λ‖²) + ζ δ ½‖x‖²
//! ```
//!
//! where `δ` comes from a certificate (see [`crate::certify`]).

use serde::{Deserialize, Serialize};

use crate::model::DiscretePlant;
use crate::numkit::{self, Matrix, NumError};
use crate::ocp::{OcpError, OcpSpec, ProjectionPair};

pub const DEFAULT_BACKTRACK_CAP: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum PdgError {
    #[error("invalid controller parameter: {0}")]
    Domain(String),
    #[error(
        "certification violated: no step size with ΔV < 0 after {backtracks} backtracks \
         (last γ = {gamma:e}, ΔV = {delta_v:e})"
    )]
    CertificationViolated { backtracks: usize, gamma: f64, delta_v: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(
        "equilibrium iteration did not converge in {iters} iterations: step norm {step_norm:e}, \
         max g(w) {g_max:e}, ‖h − αλ‖ {stationarity:e}"
    )]
    NotConverged { iters: usize, step_norm: f64, g_max: f64, stationarity: f64 },
    #[error(transparent)]
    Ocp(#[from] OcpError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Gains of the controller. `kappa` and `tau` are always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdgParams {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    /// Sampling period Δt.
    pub dt: f64,
    /// Backtracking factor.
    pub c: f64,
}

impl PdgParams {
    pub fn new(alpha: f64, beta: f64, zeta: f64, dt: f64) -> Result<Self, PdgError> {
        let p = Self { alpha, beta, zeta, dt, c: 0.5 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PdgError> {
        let bad = |name: &str, v: f64| Err(PdgError::Domain(format!("{name} = {v}")));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta", self.beta);
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return bad("zeta", self.zeta);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", self.dt);
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad("c", self.c);
        }
        Ok(())
    }

    /// `κ = 1 + 2αβ`.
    pub fn kappa(&self) -> f64 {
        1.0 + 2.0 * self.alpha * self.beta
    }

    /// `τ = 1 / (1 + αβ)`.
    pub fn tau(&self) -> f64 {
        1.0 / (1.0 + self.alpha * self.beta)
    }

    pub fn zeta_dt(&self) -> f64 {
        self.zeta * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdgState {
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PdgState {
    pub fn zeros(spec: &OcpSpec) -> Self {
        Self { w: vec![0.0; spec.nw()], mu: vec![0.0; spec.n_mu()], lambda: vec![0.0; spec.n_lambda()] }
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().chain(&self.mu).chain(&self.lambda).all(|v| *v == 0.0)
    }

    /// `S^C = ½(‖w‖² + ‖μ‖² + ‖λ‖²)`.
    pub fn storage(&self) -> f64 {
        0.5 * (numkit::norm_sq(&self.w) + numkit::norm_sq(&self.mu) + numkit::norm_sq(&self.lambda))
    }

    pub fn apply(&self, d: &Increment) -> Self {
        Self {
            w: numkit::add(&self.w, &d.w),
            mu: numkit::add(&self.mu, &d.mu),
            lambda: numkit::add(&self.lambda, &d.lambda),
        }
    }
}

/// Increment `(Δw, Δμ, Δλ)` or a vector field `(ẇ, μ̇, λ̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Increment {
    pub fn norm(&self) -> f64 {
        (numkit::norm_sq(&self.w) + numkit::norm_sq(&self.mu) + numkit::norm_sq(&self.lambda)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: PdgState,
    pub u: Vec<f64>,
    pub gamma: f64,
    pub backtracks: usize,
    pub delta_v: f64,
}

/// How `γ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPolicy {
    /// Backtrack `γ ← cγ` from 1 until `ΔV < 0`.
    Backtracking,
    /// As `Backtracking`, but an exhausted cap takes the last (smallest) `γ`
    /// instead of failing. For runs without a feasible certificate, where
    /// the plant term alone can keep `ΔV` positive for every `γ`.
    BacktrackingToCap,
    /// Always use the given `γ`; `ΔV` is still reported.
    Fixed(f64),
}

/// Which vector the inequality is evaluated on when projection is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InequalityOn {
    /// `g(K w + L x)`.
    #[default]
    Projected,
    /// `g(w)`.
    Raw,
}

/// `[a]⁺_b`: `a_i` where `b_i > 0`, `max(0, a_i)` where `b_i = 0`.
pub fn plus_op(a: &[f64], b: &[f64]) -> Result<Vec<f64>, PdgError> {
    if a.len() != b.len() {
        return Err(PdgError::Domain(format!("plus_op lengths {} and {}", a.len(), b.len())));
    }
    a.iter()
        .zip(b)
        .map(|(&ai, &bi)| {
            if bi < 0.0 || bi.is_nan() {
                Err(PdgError::Domain(format!("plus_op needs b ≥ 0, got {bi}")))
            } else if bi > 0.0 {
                Ok(ai)
            } else {
                Ok(ai.max(0.0))
            }
        })
        .collect()
}

/// Per-component scale keeping `μ + ζΔt η̄∘[g]⁺_μ` nonnegative.
pub fn eta_bar(mu: &[f64], gplus: &[f64], zeta_dt: f64) -> Vec<f64> {
    mu.iter()
        .zip(gplus)
        .map(|(&m, &gp)| if m + zeta_dt * gp >= 0.0 { 1.0 } else { -m / (zeta_dt * gp) })
        .collect()
}

#[derive(Debug, Clone)]
struct ProjectedIneq {
    gk: Matrix,
    gl: Matrix,
}

/// Step quantities that do not depend on `γ`.
#[derive(Debug, Clone)]
struct Prepared {
    gplus: Vec<f64>,
    eta_bar: Vec<f64>,
    landing: Vec<bool>,
    d_lambda: Vec<f64>,
    /// `−ζΔt(∇f + κ∇h(λ + βΔλ/(ζΔt)))`
    dw_fixed: Vec<f64>,
    /// `−ζΔt ∇g(η̄∘μ)`
    dw_gamma: Vec<f64>,
}

/// Controller with its problem data. Holds no trajectory state.
#[derive(Debug, Clone)]
pub struct Pdg {
    spec: OcpSpec,
    params: PdgParams,
    projection: Option<ProjectionPair>,
    projected_ineq: Option<ProjectedIneq>,
    backtrack_cap: usize,
}

impl Pdg {
    pub fn new(spec: OcpSpec, params: PdgParams) -> Result<Self, PdgError> {
        params.validate()?;
        Ok(Self { spec, params, projection: None, projected_ineq: None, backtrack_cap: DEFAULT_BACKTRACK_CAP })
    }

    /// Applies `u = E(K w + L x)`; with [`InequalityOn::Projected`] the
    /// controller also evaluates `g` on the projected vector.
    pub fn with_projection(mut self, ineq: InequalityOn) -> Result<Self, PdgError> {
        let pair = self.spec.projection()?;
        self.projected_ineq = match ineq {
            InequalityOn::Projected => {
                Some(ProjectedIneq { gk: self.spec.g.mul(&pair.k), gl: self.spec.g.mul(&pair.l) })
            }
            InequalityOn::Raw => None,
        };
        self.projection = Some(pair);
        Ok(self)
    }

    pub fn with_backtrack_cap(mut self, cap: usize) -> Self {
        self.backtrack_cap = cap;
        self
    }

    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    pub fn params(&self) -> &PdgParams {
        &self.params
    }

    pub fn projection(&self) -> Option<&ProjectionPair> {
        self.projection.as_ref()
    }

    /// The vector the metrics and the applied input are read from.
    pub fn effective_w(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        match &self.projection {
            Some(p) => p.apply(w, x),
            None => w.to_vec(),
        }
    }

    /// Applied input `E w` or `E(K w + L x)`.
    pub fn input(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        match &self.projection {
            Some(p) => {
                let m = self.spec.m;
                (0..m)
                    .map(|i| {
                        let kw: f64 = numkit::dot(p.k.row(i), w);
                        kw + numkit::dot(p.l.row(i), x)
                    })
                    .collect()
            }
            None => self.spec.input(w),
        }
    }

    /// Inequality value as seen by the controller.
    pub fn ineq(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        match &self.projected_ineq {
            Some(pi) => {
                let mut g = pi.gk.matvec(w);
                pi.gl.matvec_acc(1.0, x, &mut g);
                numkit::add(&g, &self.spec.g0)
            }
            None => self.spec.ineq(w),
        }
    }

    /// `∇g v`.
    fn ineq_grad_mul(&self, v: &[f64]) -> Vec<f64> {
        match &self.projected_ineq {
            Some(pi) => pi.gk.tmatvec(v),
            None => self.spec.g.tmatvec(v),
        }
    }

    /// `∇f + κ∇h(λ + s)`.
    fn grad_core(&self, w: &[f64], lambda_shifted: &[f64]) -> Vec<f64> {
        let mut out = self.spec.grad_f(w);
        self.spec.c.tmatvec_acc(self.params.kappa(), lambda_shifted, &mut out);
        out
    }

    /// Continuous-time reference field `(ẇ, μ̇, λ̇)`.
    pub fn cont_field(&self, s: &PdgState, x: &[f64]) -> Increment {
        let p = &self.params;
        let h = self.spec.eq_residual(&s.w, x);
        let lambda_dot: Vec<f64> =
            s.lambda.iter().zip(&h).map(|(l, hi)| p.zeta * p.tau() * (-p.alpha * l + hi)).collect();
        let gplus = plus_op(&self.ineq(&s.w, x), &s.mu).expect("μ stays nonnegative");
        let mu_dot: Vec<f64> = gplus.iter().map(|v| p.zeta * v).collect();
        let shifted: Vec<f64> = s.lambda.iter().zip(&lambda_dot).map(|(l, ld)| l + p.beta / p.zeta * ld).collect();
        let mut core = self.grad_core(&s.w, &shifted);
        numkit::axpy(1.0, &self.ineq_grad_mul(&s.mu), &mut core);
        Increment { w: numkit::scaled(&core, -p.zeta), mu: mu_dot, lambda: lambda_dot }
    }

    fn prepare(&self, s: &PdgState, x: &[f64]) -> Result<Prepared, PdgError> {
        let p = &self.params;
        let zdt = p.zeta_dt();
        let h = self.spec.eq_residual(&s.w, x);
        let gplus = plus_op(&self.ineq(&s.w, x), &s.mu)?;
        let eta_bar = eta_bar(&s.mu, &gplus, zdt);
        let landing: Vec<bool> = s.mu.iter().zip(&gplus).map(|(m, g)| m + zdt * g < 0.0).collect();
        let d_lambda: Vec<f64> = s.lambda.iter().zip(&h).map(|(l, hi)| zdt * p.tau() * (-p.alpha * l + hi)).collect();
        let shifted: Vec<f64> = s.lambda.iter().zip(&d_lambda).map(|(l, dl)| l + p.beta * dl / zdt).collect();
        let dw_fixed = numkit::scaled(&self.grad_core(&s.w, &shifted), -zdt);
        let em: Vec<f64> = eta_bar.iter().zip(&s.mu).map(|(e, m)| e * m).collect();
        let dw_gamma = numkit::scaled(&self.ineq_grad_mul(&em), -zdt);
        Ok(Prepared { gplus, eta_bar, landing, d_lambda, dw_fixed, dw_gamma })
    }

    fn candidate_from(&self, s: &PdgState, pre: &Prepared, gamma: f64) -> Increment {
        let zdt = self.params.zeta_dt();
        let mut dw = pre.dw_fixed.clone();
        numkit::axpy(gamma, &pre.dw_gamma, &mut dw);
        let mu = (0..s.mu.len())
            .map(|i| {
                if pre.landing[i] {
                    // same value as ζΔt γ η̄_i [g]⁺_i, without the rounding residue
                    -gamma * s.mu[i]
                } else {
                    zdt * gamma * pre.eta_bar[i] * pre.gplus[i]
                }
            })
            .collect();
        Increment { w: dw, mu, lambda: pre.d_lambda.clone() }
    }

    /// `(Δw, Δμ, Δλ)` for `η = γ η̄`.
    pub fn candidate(&self, s: &PdgState, x: &[f64], gamma: f64) -> Result<Increment, PdgError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(PdgError::Domain(format!("γ must lie in (0, 1], got {gamma}")));
        }
        let pre = self.prepare(s, x)?;
        Ok(self.candidate_from(s, &pre, gamma))
    }

    /// `ΔV = ΔS^C + ζ δ ΔS^P` along the candidate, with the plant advanced by
    /// the applied input.
    pub fn delta_v(&self, s: &PdgState, x: &[f64], cand: &Increment, delta: f64, plant: &DiscretePlant) -> f64 {
        let half_diff = |a: &[f64], d: &[f64]| numkit::dot(a, d) + 0.5 * numkit::norm_sq(d);
        let d_sc = half_diff(&s.w, &cand.w) + half_diff(&s.mu, &cand.mu) + half_diff(&s.lambda, &cand.lambda);
        let u = self.input(&s.w, x);
        let x_next = plant.next_state(x, &u);
        let dx = numkit::sub(&x_next, x);
        let d_sp = half_diff(x, &dx);
        d_sc + self.params.zeta * delta * d_sp
    }

    /// Backtracking search: `γ = c^j` for the smallest `j` with `ΔV < 0`.
    ///
    /// Returns `(γ, backtracks, ΔV, candidate)`.
    pub fn find_gamma(
        &self,
        s: &PdgState,
        x: &[f64],
        delta: f64,
        plant: &DiscretePlant,
    ) -> Result<(f64, usize, f64, Increment), PdgError> {
        self.search_gamma(s, x, delta, plant, false)
    }

    fn search_gamma(
        &self,
        s: &PdgState,
        x: &[f64],
        delta: f64,
        plant: &DiscretePlant,
        accept_cap: bool,
    ) -> Result<(f64, usize, f64, Increment), PdgError> {
        let pre = self.prepare(s, x)?;
        if s.is_zero() && x.iter().all(|v| *v == 0.0) {
            return Ok((1.0, 0, 0.0, self.candidate_from(s, &pre, 1.0)));
        }
        let mut gamma = 1.0;
        let mut j = 0;
        loop {
            let cand = self.candidate_from(s, &pre, gamma);
            let dv = self.delta_v(s, x, &cand, delta, plant);
            if dv < 0.0 {
                return Ok((gamma, j, dv, cand));
            }
            if j >= self.backtrack_cap {
                if accept_cap {
                    return Ok((gamma, j, dv, cand));
                }
                return Err(PdgError::CertificationViolated { backtracks: j, gamma, delta_v: dv });
            }
            gamma *= self.params.c;
            j += 1;
        }
    }

    /// One sampling period. `u` is computed from the state at the start of
    /// the step.
    pub fn step(
        &self,
        s: &PdgState,
        x: &[f64],
        delta: f64,
        plant: &DiscretePlant,
        policy: GammaPolicy,
    ) -> Result<StepOutcome, PdgError> {
        let u = self.input(&s.w, x);
        let (gamma, backtracks, delta_v, cand) = match policy {
            GammaPolicy::Backtracking => self.find_gamma(s, x, delta, plant)?,
            GammaPolicy::BacktrackingToCap => self.search_gamma(s, x, delta, plant, true)?,
            GammaPolicy::Fixed(g) => {
                let cand = self.candidate(s, x, g)?;
                let dv = self.delta_v(s, x, &cand, delta, plant);
                (g, 0, dv, cand)
            }
        };
        Ok(StepOutcome { next: s.apply(&cand), u, gamma, backtracks, delta_v })
    }

    /// Coefficients of `ΔV / (ζΔt) = zᵀ H̄_d z + a γ² + b γ` with
    /// `z = [w; x; λ]`, and the positive root `γ̄` of `aγ² + bγ = ‖z‖²_{−H̄_d}`.
    ///
    /// Only defined for the inequality evaluated on `w`.
    pub fn analytic_gamma(&self, s: &PdgState, x: &[f64], hbar_d: &Matrix) -> Result<GammaBound, PdgError> {
        if self.projected_ineq.is_some() {
            return Err(PdgError::Precondition("the analytic bound assumes g evaluated on w".into()));
        }
        let spec = &self.spec;
        let nz = spec.nw() + spec.n + spec.n_lambda();
        if hbar_d.shape() != (nz, nz) {
            return Err(NumError::Dimension(format!("H̄_d must be {nz}x{nz}")).into());
        }
        let top = numkit::max_eigenvalue(hbar_d)?;
        if !(top < 0.0) {
            return Err(PdgError::Precondition(format!("H̄_d is not negative definite: λ_max = {top:e}")));
        }
        let p = &self.params;
        let zdt = p.zeta_dt();
        let gplus = plus_op(&spec.ineq(&s.w), &s.mu)?;
        let eb = eta_bar(&s.mu, &gplus, zdt);
        let em: Vec<f64> = eb.iter().zip(&s.mu).map(|(e, m)| e * m).collect();
        let gw = spec.g.matvec(&s.w);
        let b1 = numkit::dot(&em, &numkit::sub(&gplus, &gw));
        // ∇f + τκ∇h(λ + βh)
        let h = spec.eq_residual(&s.w, x);
        let lh: Vec<f64> = s.lambda.iter().zip(&h).map(|(l, hi)| l + p.beta * hi).collect();
        let mut v = spec.grad_f(&s.w);
        spec.c.tmatvec_acc(p.tau() * p.kappa(), &lh, &mut v);
        let b2 = numkit::dot(&em, &spec.g.matvec(&v));
        let eg: Vec<f64> = eb.iter().zip(&gplus).map(|(e, g)| e * g).collect();
        let a2 = 0.5 * (numkit::norm_sq(&eg) + numkit::norm_sq(&spec.g.tmatvec(&em)));
        let a = zdt * a2;
        let b = b1 + zdt * b2;
        let mut z = s.w.clone();
        z.extend_from_slice(x);
        z.extend_from_slice(&s.lambda);
        let c = -hbar_d.quad_form(&z);
        let gamma_bar = if a > 0.0 {
            (-b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a)
        } else if b > 0.0 {
            c / b
        } else {
            f64::INFINITY
        };
        Ok(GammaBound { a, b, z_norm_sq: c, gamma_bar })
    }

    /// Iterates the controller with `x` frozen and `γ = 1` until the step
    /// falls below `tol`.
    pub fn equilibrium_probe(&self, x_fixed: &[f64], tol: f64, max_iters: usize) -> Result<PdgState, PdgError> {
        let mut s = PdgState::zeros(&self.spec);
        let mut step_norm = f64::INFINITY;
        for _ in 0..max_iters {
            let cand = self.candidate(&s, x_fixed, 1.0)?;
            step_norm = cand.norm();
            s = s.apply(&cand);
            if step_norm <= tol {
                return Ok(s);
            }
        }
        let g_max = self.ineq(&s.w, x_fixed).into_iter().fold(f64::NEG_INFINITY, f64::max);
        Err(PdgError::NotConverged { iters: max_iters, step_norm, g_max, stationarity: self.stationarity(&s, x_fixed) })
    }

    /// `‖h(w; x) − αλ‖`, zero at an equilibrium.
    pub fn stationarity(&self, s: &PdgState, x: &[f64]) -> f64 {
        let h = self.spec.eq_residual(&s.w, x);
        let r: Vec<f64> = h.iter().zip(&s.lambda).map(|(hi, l)| hi - self.params.alpha * l).collect();
        numkit::norm(&r)
    }
}

/// Output of [`Pdg::analytic_gamma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBound {
    pub a: f64,
    pub b: f64,
    /// `‖z‖²_{−H̄_d}`.
    pub z_norm_sq: f64,
    pub gamma_bar: f64,
}
