//! Dissipativity matrices and stability certificates.
//!
//! A certificate is the minimum over `δ > 0` of `λ_max(M₀ + δM₁)` for an
//! affine pencil built from the controller and plant supply rates. A negative
//! minimum certifies the closed loop; the minimizer `δ*` weights the plant
//! storage inside the Lyapunov function used by the controller.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{ContinuousPlant, DiscretePlant};
use crate::numkit::{self, golden_min, max_eigenvalue, Matrix, NumError};
use crate::ocp::{OcpSpec, ProjectionPair};
use crate::pdg::PdgParams;

pub const LOG_DELTA_MIN: f64 = -6.0;
pub const LOG_DELTA_MAX: f64 = 6.0;
pub const LOG_DELTA_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error(
        "plant is not dissipative with the identity storage: λ_max(Sym(A)) = {lambda_max:e}; \
         consider pre-stabilization"
    )]
    NotDissipative { lambda_max: f64 },
    #[error(
        "discrete plant supply fails: λ_max(Sym(A_d) − I) = {lambda_max:e} is not negative"
    )]
    DiscreteNotDissipative { lambda_max: f64 },
    #[error("pre-stabilization failed; attempted (gain, λ_max) pairs: {attempts:?}")]
    PreStabilizeFailed { attempts: Vec<(f64, f64)> },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// `[[Sym(A_c), B_c/2], [B_cᵀ/2, 0]]`.
pub fn plant_supply_ct(plant: &ContinuousPlant) -> Result<Matrix, CertifyError> {
    let sa = plant.a.sym();
    let top = max_eigenvalue(&sa)?;
    if !(top < 0.0) {
        return Err(CertifyError::NotDissipative { lambda_max: top });
    }
    Ok(supply_block(&sa, &plant.b, 1.0))
}

fn supply_block(q: &Matrix, b: &Matrix, scale: f64) -> Matrix {
    let (n, m) = (q.rows(), b.cols());
    let mut h = Matrix::zeros(n + m, n + m);
    h.set_block(0, 0, q);
    let half_b = b.scale(0.5);
    h.set_block(0, n, &half_b);
    h.set_block(n, 0, &half_b.transpose());
    h.scale(scale)
}

/// Output feedback `u = K x + v` making `Sym(A_c + B_c K)` negative definite.
#[derive(Debug, Clone, PartialEq)]
pub struct PreStabilized {
    pub gain: Matrix,
    pub plant: ContinuousPlant,
    pub lambda_max: f64,
}

/// Searches `K = −k B_cᵀ` over `k = 0, 1, 2, 4, …, 2⁴⁰`.
pub fn pre_stabilize(plant: &ContinuousPlant) -> Result<PreStabilized, CertifyError> {
    let mut attempts = Vec::new();
    let bt = plant.b.transpose();
    for j in 0..=41 {
        let k = if j == 0 { 0.0 } else { 2f64.powi(j - 1) };
        let gain = bt.scale(-k);
        let a = plant.a.add(&plant.b.mul(&gain));
        let sa = a.sym();
        let top = max_eigenvalue(&sa)?;
        attempts.push((k, top));
        // relative margin so rounding at large gains cannot fake definiteness
        if top < -1e-10 * sa.max_abs() {
            let gain = if k == 0.0 { Matrix::zeros(plant.m(), plant.n()) } else { gain };
            return Ok(PreStabilized { gain, plant: ContinuousPlant { a, b: plant.b.clone() }, lambda_max: top });
        }
    }
    Err(CertifyError::PreStabilizeFailed { attempts })
}

/// `(H^P_d, P^P_d)` for the sampled plant.
pub fn plant_supply_dt(plant: &DiscretePlant) -> Result<(Matrix, Matrix), CertifyError> {
    let n = plant.n();
    let q = plant.a.sym().sub(&Matrix::identity(n));
    let top = max_eigenvalue(&q)?;
    if !(top < 0.0) {
        return Err(CertifyError::DiscreteNotDissipative { lambda_max: top });
    }
    let dt = plant.step;
    let h = supply_block(&q, &plant.b, 1.0 / dt);
    let ab = Matrix::hstack(&[&plant.a.sub(&Matrix::identity(n)), &plant.b])?;
    let p = ab.tmul(&ab).scale(1.0 / (2.0 * dt * dt));
    Ok((h, p))
}

/// Which block stands for the strong convexity of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ObjectiveBlock {
    /// The Hessian `P` itself.
    #[default]
    #[serde(rename = "P")]
    Hessian,
    /// `σI`.
    #[serde(rename = "sigma")]
    Sigma,
}

/// How the smoothness term is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessBound {
    /// Exact for quadratic `f`.
    #[default]
    Quadratic,
    /// `(ρ² + 2ρ‖X‖)I + XᵀX`, valid for any ρ-smooth `f`.
    Generic,
}

/// Which input map enters the plant supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputMap {
    /// `u = E(K w + L x)`.
    #[default]
    Projected,
    /// `u = E w`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CertVariant {
    pub objective_block: ObjectiveBlock,
    pub smoothness: SmoothnessBound,
    pub input_map: InputMap,
}

/// `(H^C_c, H̄^C_c)`.
pub fn controller_supply_ct(spec: &OcpSpec, params: &PdgParams, block: ObjectiveBlock) -> (Matrix, Matrix) {
    let (nw, n, nl) = (spec.nw(), spec.n, spec.n_lambda());
    let (alpha, beta, tau, kappa) = (params.alpha, params.beta, params.tau(), params.kappa());
    let p = match block {
        ObjectiveBlock::Hessian => spec.p().clone(),
        ObjectiveBlock::Sigma => Matrix::identity(nw).scale(spec.sigma()),
    };
    let (c, d) = (&spec.c, &spec.d);
    let ctc = c.tmul(c);
    let ctd = c.tmul(d);
    let dtd = d.tmul(d);

    let mut hc = Matrix::zeros(nw + n, nw + n);
    hc.set_block(0, 0, &p.scale(-1.0).sub(&ctc.scale(beta)));
    hc.set_block(0, nw, &ctd.scale(-beta));
    hc.set_block(nw, 0, &ctd.transpose().scale(-beta));
    hc.set_block(nw, nw, &dtd.scale(tau / (4.0 * alpha)));

    let mut hb = Matrix::zeros(nw + n + nl, nw + n + nl);
    hb.set_block(0, 0, &p.scale(-1.0).sub(&ctc.scale(tau * kappa * beta)));
    let b12 = ctd.scale(-tau * kappa * beta / 2.0);
    hb.set_block(0, nw, &b12);
    hb.set_block(nw, 0, &b12.transpose());
    let b13 = c.transpose().scale(-tau * alpha * beta);
    hb.set_block(0, nw + n, &b13);
    hb.set_block(nw + n, 0, &b13.transpose());
    let b23 = d.transpose().scale(tau / 2.0);
    hb.set_block(nw, nw + n, &b23);
    hb.set_block(nw + n, nw, &b23.transpose());
    hb.set_block(nw + n, nw + n, &Matrix::identity(nl).scale(-tau * alpha));
    (hc, hb)
}

/// `(X, P̄, P̄^C_d)`.
pub fn smoothness_matrices(
    spec: &OcpSpec,
    params: &PdgParams,
    bound: SmoothnessBound,
) -> Result<(Matrix, Matrix, Matrix), NumError> {
    let (nw, n, nl) = (spec.nw(), spec.n, spec.n_lambda());
    let (alpha, beta, tau, kappa) = (params.alpha, params.beta, params.tau(), params.kappa());
    let (c, d) = (&spec.c, &spec.d);
    let inner = Matrix::hstack(&[&c.scale(beta), &d.scale(beta), &Matrix::identity(nl)])?;
    let x = c.tmul(&inner).scale(tau * kappa);
    let pbar = match bound {
        SmoothnessBound::Quadratic => {
            let mut a0 = x.clone();
            a0.add_scaled(1.0, &Matrix::hstack(&[spec.p(), &Matrix::zeros(nw, n + nl)])?);
            a0.tmul(&a0)
        }
        SmoothnessBound::Generic => {
            let rho = spec.rho();
            let xn = numkit::spectral_norm(&x)?;
            let mut pb = x.tmul(&x);
            pb.add_scaled(rho * rho + 2.0 * rho * xn, &Matrix::identity(nw + n + nl));
            pb
        }
    };
    let cda = Matrix::hstack(&[c, d, &Matrix::identity(nl).scale(-alpha)])?;
    let mut pcd = cda.tmul(&cda).scale(tau * tau);
    pcd.add_scaled(1.0, &pbar);
    Ok((x, pbar, pcd.scale(0.5)))
}

/// `(W, W̄)`: `W [w; x] = [x; u]`, `W̄ [w; x; λ] = [x; u]`.
pub fn build_w(spec: &OcpSpec, projection: Option<&ProjectionPair>) -> (Matrix, Matrix) {
    let (nw, n, m, nl) = (spec.nw(), spec.n, spec.m, spec.n_lambda());
    let mut w = Matrix::zeros(n + m, nw + n);
    w.set_block(0, nw, &Matrix::identity(n));
    match projection {
        Some(p) => {
            w.set_block(n, 0, &spec.e.mul(&p.k));
            w.set_block(n, nw, &spec.e.mul(&p.l));
        }
        None => w.set_block(n, 0, &spec.e),
    }
    let mut wbar = Matrix::zeros(n + m, nw + n + nl);
    wbar.set_block(0, 0, &w);
    (w, wbar)
}

/// `M(δ) = base + δ·slope`.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub base: Matrix,
    pub slope: Matrix,
}

impl Pencil {
    pub fn at(&self, delta: f64) -> Matrix {
        let mut m = self.base.clone();
        m.add_scaled(delta, &self.slope);
        m
    }

    pub fn lambda_max(&self, delta: f64) -> Result<f64, NumError> {
        max_eigenvalue(&self.at(delta))
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for m in [&self.base, &self.slope] {
            hasher.update((m.rows() as u64).to_le_bytes());
            hasher.update((m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Golden search of `λ_max` over `log₁₀ δ ∈ [−6, 6]`.
    pub fn minimize(&self) -> Result<(f64, f64, bool), NumError> {
        let mut failure = None;
        let (t, val) = golden_min(
            |t| match self.lambda_max(10f64.powf(t)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            LOG_DELTA_MIN,
            LOG_DELTA_MAX,
            LOG_DELTA_TOL,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        let boundary = t - LOG_DELTA_MIN < 1e-3 || LOG_DELTA_MAX - t < 1e-3;
        Ok((10f64.powf(t), val, boundary))
    }
}

fn projection_for(spec: &OcpSpec, map: InputMap) -> Result<Option<ProjectionPair>, NumError> {
    match map {
        InputMap::Plain => Ok(None),
        InputMap::Projected => spec.projection().map(Some).map_err(|e| match e {
            crate::ocp::OcpError::Num(n) | crate::ocp::OcpError::RankDeficient(n) => n,
            other => NumError::Domain(other.to_string()),
        }),
    }
}

/// `H_c(δ) = H^C_c + δ Wᵀ H^P_c W`.
pub fn pencil_ct(
    spec: &OcpSpec,
    params: &PdgParams,
    plant: &ContinuousPlant,
    variant: CertVariant,
) -> Result<Pencil, CertifyError> {
    let hp = plant_supply_ct(plant)?;
    let proj = projection_for(spec, variant.input_map)?;
    let (w, _) = build_w(spec, proj.as_ref());
    let (hc, _) = controller_supply_ct(spec, params, variant.objective_block);
    Ok(Pencil { base: hc, slope: w.tmul(&hp.mul(&w)).sym() })
}

/// `H̄_c(δ) = H̄^C_c + δ W̄ᵀ H^P_c W̄`, the augmented form of [`pencil_ct`].
pub fn pencil_ct_augmented(
    spec: &OcpSpec,
    params: &PdgParams,
    plant: &ContinuousPlant,
    variant: CertVariant,
) -> Result<Pencil, CertifyError> {
    let hp = plant_supply_ct(plant)?;
    let proj = projection_for(spec, variant.input_map)?;
    let (_, wbar) = build_w(spec, proj.as_ref());
    let (_, hb) = controller_supply_ct(spec, params, variant.objective_block);
    Ok(Pencil { base: hb, slope: wbar.tmul(&hp.mul(&wbar)).sym() })
}

/// `H̄_d(δ) = H̄^C_c + ζΔt P̄^C_d + δ W̄ᵀ(H^P_d + Δt P^P_d) W̄`.
pub fn pencil_dt(
    spec: &OcpSpec,
    params: &PdgParams,
    plant: &DiscretePlant,
    variant: CertVariant,
) -> Result<Pencil, CertifyError> {
    let (hpd, ppd) = plant_supply_dt(plant)?;
    let proj = projection_for(spec, variant.input_map)?;
    let (_, wbar) = build_w(spec, proj.as_ref());
    let (_, hb) = controller_supply_ct(spec, params, variant.objective_block);
    let (_, _, pcd) = smoothness_matrices(spec, params, variant.smoothness)?;
    let mut base = hb;
    base.add_scaled(params.zeta_dt(), &pcd);
    let mut supply = hpd;
    supply.add_scaled(plant.step, &ppd);
    Ok(Pencil { base: base.sym(), slope: wbar.tmul(&supply.mul(&wbar)).sym() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertKind,
    pub delta_star: f64,
    /// Also the smallest `ε` with `εI ⪰ M(δ*)`.
    pub lambda_max_star: f64,
    pub feasible: bool,
    pub variant: CertVariant,
    /// `ζΔt` for sampled-data certificates.
    pub zeta_dt: Option<f64>,
    pub dimension: usize,
    /// The minimizer sits within 1e-3 decades of a search bound.
    pub boundary_hit: bool,
    pub matrices_hash: String,
}

impl Certificate {
    fn from_pencil(pencil: &Pencil, kind: CertKind, variant: CertVariant, zeta_dt: Option<f64>) -> Result<Self, NumError> {
        let (delta_star, lambda_max_star, boundary_hit) = pencil.minimize()?;
        Ok(Self {
            kind,
            delta_star,
            lambda_max_star,
            feasible: lambda_max_star < 0.0,
            variant,
            zeta_dt,
            dimension: pencil.base.rows(),
            boundary_hit,
            matrices_hash: pencil.digest(),
        })
    }
}

/// Continuous-time certificate; independent of `ζ` and `Δt`.
pub fn certify_ct(
    spec: &OcpSpec,
    params: &PdgParams,
    plant: &ContinuousPlant,
    variant: CertVariant,
) -> Result<Certificate, CertifyError> {
    let pencil = pencil_ct(spec, params, plant, variant)?;
    Ok(Certificate::from_pencil(&pencil, CertKind::Continuous, variant, None)?)
}

/// Sampled-data certificate for the plant sampled at `params.dt`.
pub fn certify_dt(
    spec: &OcpSpec,
    params: &PdgParams,
    plant: &DiscretePlant,
    variant: CertVariant,
) -> Result<Certificate, CertifyError> {
    let pencil = pencil_dt(spec, params, plant, variant)?;
    Ok(Certificate::from_pencil(&pencil, CertKind::Discrete, variant, Some(params.zeta_dt()))?)
}
