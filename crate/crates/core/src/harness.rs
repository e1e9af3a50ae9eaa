//! Sampled-data closed loop, performance metrics, timing and export.
//!
//! The plant runs in error coordinates with the exact zero-order-hold model;
//! logs store physical coordinates.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{cgmres_residual, cgmres_step, qp_solve, BaselineError, CgmresState};
use crate::certify::{certify_dt, CertVariant, Certificate, CertifyError, InputMap};
use crate::config::Scenario;
use crate::numkit;
use crate::ocp::{CondensedQp, OcpError};
use crate::pdg::{GammaPolicy, Pdg, PdgError, PdgState};

pub const DIVERGENCE_LIMIT: f64 = 1e9;
const QP_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("certificate is infeasible (λ*_max = {lambda_max:e}); pass the unsafe override to run anyway")]
    Uncertified { lambda_max: f64 },
    #[error("controller kind {0:?} needs a certificate")]
    MissingCertificate(ControllerKind),
    #[error("logs are on different grids: {0}")]
    GridMismatch(String),
    #[error("bench needs at least 10 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Pdg(#[from] PdgError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Pdg,
    PdgProj,
    Cgmres1,
    Cgmres2,
    MpcOracle,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] =
        [ControllerKind::Pdg, ControllerKind::PdgProj, ControllerKind::Cgmres1, ControllerKind::Cgmres2, ControllerKind::MpcOracle];

    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Pdg => "pdg",
            ControllerKind::PdgProj => "pdg_proj",
            ControllerKind::Cgmres1 => "cgmres1",
            ControllerKind::Cgmres2 => "cgmres2",
            ControllerKind::MpcOracle => "mpc_oracle",
        }
    }

    pub fn is_pdg(&self) -> bool {
        matches!(self, ControllerKind::Pdg | ControllerKind::PdgProj)
    }

    /// Input map the certificate of this controller is built with.
    pub fn input_map(&self) -> InputMap {
        match self {
            ControllerKind::PdgProj => InputMap::Projected,
            _ => InputMap::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub case_name: String,
    pub duration: f64,
    /// Physical initial state.
    pub x0: Vec<f64>,
    pub kind: ControllerKind,
    pub gamma_policy: GammaPolicy,
    /// Run a pdg controller even if its certificate is infeasible.
    pub allow_uncertified: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn from_scenario(s: &Scenario, kind: ControllerKind) -> Self {
        let c = &s.config;
        Self {
            case_name: c.name.clone(),
            duration: c.run.duration,
            x0: c.run.x0.clone().unwrap_or_else(|| vec![0.0; s.plant.n()]),
            kind,
            gamma_policy: if c.controller.disable_backtracking { GammaPolicy::Fixed(1.0) } else { GammaPolicy::Backtracking },
            allow_uncertified: false,
            seed: c.run.seed,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { step: usize, state_norm: f64 },
    CertificationViolated { step: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub case_name: String,
    pub controller: ControllerKind,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub gammas: Vec<f64>,
    pub backtracks: Vec<usize>,
    /// Lyapunov function at the start of each step (pdg only, NaN otherwise).
    #[serde(with = "nan_as_null")]
    pub v_values: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub delta_v: Vec<f64>,
    pub horizon_objectives: Vec<f64>,
    pub horizon_violations: Vec<f64>,
    /// `‖h(w; x)‖` of the vector the input is read from.
    pub equality_residuals: Vec<f64>,
    /// Solver iterations per step.
    pub iterations: Vec<usize>,
    /// `min μ` per step (pdg only).
    #[serde(with = "nan_as_null")]
    pub mu_min: Vec<f64>,
    /// Norm of the full state `(w, μ, λ, x̃)` at the start of each step (pdg only).
    #[serde(with = "nan_as_null")]
    pub state_norms: Vec<f64>,
    pub delta_star: Option<f64>,
    /// Steps where backtracking ran to its cap without `ΔV < 0`
    /// (`GammaPolicy::BacktrackingToCap` only).
    pub cap_exhausted_steps: usize,
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
    pub u_upper: Vec<f64>,
    pub termination: Termination,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// `‖x_end − x_ref‖ / ‖x_ref‖`.
    pub fn final_relative_error(&self) -> f64 {
        let last = self.states.last().expect("non-empty log");
        numkit::norm(&numkit::sub(last, &self.x_ref)) / numkit::norm(&self.x_ref)
    }

    pub fn backtrack_free_fraction(&self) -> f64 {
        if self.backtracks.is_empty() {
            return 1.0;
        }
        self.backtracks.iter().filter(|b| **b == 0).count() as f64 / self.backtracks.len() as f64
    }

    fn empty(cfg: &SimConfig, s: &Scenario, delta_star: Option<f64>) -> Self {
        Self {
            case_name: cfg.case_name.clone(),
            controller: cfg.kind,
            times: vec![],
            states: vec![],
            inputs: vec![],
            gammas: vec![],
            backtracks: vec![],
            v_values: vec![],
            delta_v: vec![],
            horizon_objectives: vec![],
            horizon_violations: vec![],
            equality_residuals: vec![],
            iterations: vec![],
            mu_min: vec![],
            state_norms: vec![],
            delta_star,
            cap_exhausted_steps: 0,
            x_ref: s.target.x_ref.clone(),
            u_ref: s.target.u_ref.clone(),
            u_upper: s.config.target.u_upper.clone(),
            termination: Termination::Completed,
        }
    }
}

/// JSON has no NaN; missing values round-trip through `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

// one runner per simulation, boxing buys nothing
#[allow(clippy::large_enum_variant)]
enum Runner {
    Pdg { pdg: Pdg, state: PdgState, delta: f64, policy: GammaPolicy },
    Cgmres { state: CgmresState, qp: CondensedQp },
    Oracle { qp: CondensedQp },
}

struct StepRecord {
    u: Vec<f64>,
    gamma: f64,
    backtracks: usize,
    v: f64,
    delta_v: f64,
    w_eff: Vec<f64>,
    iterations: usize,
    mu_min: f64,
    state_norm: f64,
}

impl Runner {
    fn new(s: &Scenario, kind: ControllerKind, x0: &[f64], delta: Option<f64>, policy: GammaPolicy) -> Result<Self, SimError> {
        let cap = s.config.controller.backtrack_cap;
        Ok(match kind {
            ControllerKind::Pdg | ControllerKind::PdgProj => {
                let mut pdg = Pdg::new(s.spec.clone(), s.params)?.with_backtrack_cap(cap);
                if kind == ControllerKind::PdgProj {
                    pdg = pdg.with_projection(s.config.controller.inequality_on)?;
                }
                let delta = delta.ok_or(SimError::MissingCertificate(kind))?;
                Runner::Pdg { state: PdgState::zeros(&s.spec), pdg, delta, policy }
            }
            ControllerKind::Cgmres1 | ControllerKind::Cgmres2 => {
                let qp = s.spec.condense()?;
                let k = if kind == ControllerKind::Cgmres1 { 1 } else { 2 };
                Runner::Cgmres { state: CgmresState::init(&qp, x0, s.params.zeta, k)?, qp }
            }
            ControllerKind::MpcOracle => Runner::Oracle { qp: s.spec.condense()? },
        })
    }

    fn step(&mut self, s: &Scenario, x: &[f64]) -> Result<StepRecord, SimError> {
        let m = s.plant.m();
        match self {
            Runner::Pdg { pdg, state, delta, policy } => {
                let v = state.storage() + s.params.zeta * *delta * 0.5 * numkit::norm_sq(x);
                let state_norm = (2.0 * state.storage() + numkit::norm_sq(x)).sqrt();
                let w_eff = pdg.effective_w(&state.w, x);
                let mu_min = state.mu.iter().copied().fold(f64::INFINITY, f64::min);
                let out = pdg.step(state, x, *delta, &s.plant_dt, *policy)?;
                *state = out.next;
                Ok(StepRecord {
                    u: out.u,
                    gamma: out.gamma,
                    backtracks: out.backtracks,
                    v,
                    delta_v: out.delta_v,
                    w_eff,
                    iterations: 1 + out.backtracks,
                    mu_min,
                    state_norm,
                })
            }
            Runner::Cgmres { state, qp } => {
                let u = state.input(m).to_vec();
                let w_eff = qp.full_vector(&state.omega[..qp.dim()], x);
                let x_pred = s.plant_dt.next_state(x, &u);
                cgmres_step(state, x, &x_pred, s.params.dt, qp);
                Ok(StepRecord {
                    u,
                    gamma: 1.0,
                    backtracks: 0,
                    v: f64::NAN,
                    delta_v: f64::NAN,
                    w_eff,
                    iterations: state.gmres_iters,
                    mu_min: f64::NAN,
                    state_norm: f64::NAN,
                })
            }
            Runner::Oracle { qp } => {
                let sol = qp_solve(qp, x, QP_TOL)?;
                let w_eff = qp.full_vector(&sol.u_seq, x);
                Ok(StepRecord {
                    u: sol.u_seq[..m].to_vec(),
                    gamma: 1.0,
                    backtracks: 0,
                    v: f64::NAN,
                    delta_v: f64::NAN,
                    w_eff,
                    iterations: sol.iterations,
                    mu_min: f64::NAN,
                    state_norm: f64::NAN,
                })
            }
        }
    }
}

/// Residual norm `‖F‖` of a C/GMRES iterate; exposed for diagnostics.
pub fn cgmres_residual_norm(state: &CgmresState, x: &[f64], qp: &CondensedQp) -> f64 {
    numkit::norm(&cgmres_residual(&state.omega, x, qp))
}

/// Certificate matching a controller kind.
pub fn certificate_for(s: &Scenario, kind: ControllerKind) -> Result<Certificate, SimError> {
    let variant: CertVariant = s.config.variant(kind.input_map());
    Ok(certify_dt(&s.spec, &s.params, &s.plant_dt, variant)?)
}

/// Runs the closed loop for `duration / Δt` steps and logs `steps + 1` rows.
pub fn simulate(cfg: &SimConfig, s: &Scenario, certificate: Option<&Certificate>) -> Result<SimLog, SimError> {
    run(cfg, s, certificate, None)
}

/// Same as [`simulate`], also returning the wall-clock seconds of every
/// controller step.
pub fn simulate_timed(
    cfg: &SimConfig,
    s: &Scenario,
    certificate: Option<&Certificate>,
) -> Result<(SimLog, Vec<f64>), SimError> {
    let mut times = Vec::new();
    let log = run(cfg, s, certificate, Some(&mut times))?;
    Ok((log, times))
}

fn run(
    cfg: &SimConfig,
    s: &Scenario,
    certificate: Option<&Certificate>,
    mut timings: Option<&mut Vec<f64>>,
) -> Result<SimLog, SimError> {
    if cfg.kind.is_pdg() {
        let cert = certificate.ok_or(SimError::MissingCertificate(cfg.kind))?;
        if !cert.feasible && !cfg.allow_uncertified {
            return Err(SimError::Uncertified { lambda_max: cert.lambda_max_star });
        }
    }
    let delta = certificate.map(|c| c.delta_star);
    let mut x = s.target.shift_state(&cfg.x0);
    let mut runner = Runner::new(s, cfg.kind, &x, delta, cfg.gamma_policy)?;
    let dt = s.params.dt;
    let steps = (cfg.duration / dt).round() as usize;
    let mut log = SimLog::empty(cfg, s, if cfg.kind.is_pdg() { delta } else { None });
    let spec = &s.spec;

    for k in 0..=steps {
        let started = Instant::now();
        let rec = match runner.step(s, &x) {
            Ok(r) => r,
            Err(SimError::Pdg(e @ PdgError::CertificationViolated { .. })) => {
                log.termination = Termination::CertificationViolated { step: k, message: e.to_string() };
                return Ok(log);
            }
            Err(e) => return Err(e),
        };
        if let Some(t) = timings.as_deref_mut() {
            t.push(started.elapsed().as_secs_f64());
        }
        let g = spec.ineq(&rec.w_eff);
        let h = spec.eq_residual(&rec.w_eff, &x);
        let gsq: f64 = g.iter().map(|v| v.max(0.0).powi(2)).sum();
        log.times.push(k as f64 * dt);
        log.states.push(s.target.unshift_state(&x));
        log.inputs.push(s.target.unshift_input(&rec.u));
        log.gammas.push(rec.gamma);
        log.backtracks.push(rec.backtracks);
        if rec.delta_v >= 0.0 && rec.backtracks > 0 {
            log.cap_exhausted_steps += 1;
        }
        log.v_values.push(rec.v);
        log.delta_v.push(rec.delta_v);
        log.horizon_objectives.push(spec.objective_value(&rec.w_eff));
        log.horizon_violations.push(gsq + numkit::norm_sq(&h));
        log.equality_residuals.push(numkit::norm(&h));
        log.iterations.push(rec.iterations);
        log.mu_min.push(rec.mu_min);
        log.state_norms.push(rec.state_norm);
        if k == steps {
            break;
        }
        x = s.plant_dt.next_state(&x, &rec.u);
        let xn = numkit::norm(&x);
        if !(xn <= DIVERGENCE_LIMIT) {
            log.termination = Termination::Diverged { step: k + 1, state_norm: xn };
            return Ok(log);
        }
    }
    Ok(log)
}

/// Table-2 style sums over the whole log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `Σ ‖[u − u_ref; x − x_ref]‖²`
    pub actual_obj: f64,
    /// `Σ ‖max(0, u − ū)‖²`
    pub actual_con: f64,
    /// `Σ f(w)`
    pub horizon_obj: f64,
    /// `Σ ‖max(0, g(w))‖² + ‖h(w)‖²`
    pub horizon_con: f64,
}

pub fn metrics(log: &SimLog) -> Metrics {
    let mut m = Metrics { actual_obj: 0.0, actual_con: 0.0, horizon_obj: 0.0, horizon_con: 0.0 };
    for (x, u) in log.states.iter().zip(&log.inputs) {
        m.actual_obj += numkit::norm_sq(&numkit::sub(u, &log.u_ref)) + numkit::norm_sq(&numkit::sub(x, &log.x_ref));
        m.actual_con += u.iter().zip(&log.u_upper).map(|(ui, ub)| (ui - ub).max(0.0).powi(2)).sum::<f64>();
    }
    m.horizon_obj = log.horizon_objectives.iter().sum();
    m.horizon_con = log.horizon_violations.iter().sum();
    m
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

impl Metrics {
    /// Objective columns divided by `obj_base`, constraint columns by `con_base`.
    pub fn normalized(&self, obj_base: &Metrics, con_base: &Metrics) -> Metrics {
        Metrics {
            actual_obj: ratio(self.actual_obj, obj_base.actual_obj),
            actual_con: ratio(self.actual_con, con_base.actual_con),
            horizon_obj: ratio(self.horizon_obj, obj_base.horizon_obj),
            horizon_con: ratio(self.horizon_con, con_base.horizon_con),
        }
    }
}

/// Metrics of `log` normalized by `baseline` in every column.
pub fn metrics_against(log: &SimLog, baseline: &SimLog) -> Result<Metrics, SimError> {
    check_grid(log, baseline)?;
    let b = metrics(baseline);
    Ok(metrics(log).normalized(&b, &b))
}

fn check_grid(a: &SimLog, b: &SimLog) -> Result<(), SimError> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(SimError::GridMismatch(format!("{} vs {} samples", a.times.len(), b.times.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub controller: ControllerKind,
    pub raw: Metrics,
    pub normalized: Metrics,
    pub completed: bool,
    /// A pdg row run despite an infeasible certificate.
    pub uncertified: bool,
    pub final_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub case_name: String,
    pub config_digest: String,
    pub objective_denominator: ControllerKind,
    pub constraint_denominator: ControllerKind,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn row(&self, kind: ControllerKind) -> &CompareRow {
        self.rows.iter().find(|r| r.controller == kind).expect("all kinds are run")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>12} {:>12} {:>12} {:>12}\n",
            "method", "actual obj", "actual con", "horizon obj", "horizon con"
        );
        for r in &self.rows {
            let n = &r.normalized;
            let flag = if r.uncertified { " (uncertified)" } else if !r.completed { " (stopped)" } else { "" };
            out.push_str(&format!(
                "{:<12} {:>12.4} {:>12.4} {:>12.4} {:>12.4}{flag}\n",
                r.controller.name(),
                n.actual_obj,
                n.actual_con,
                n.horizon_obj,
                n.horizon_con
            ));
        }
        out
    }
}

/// Runs every controller on the scenario. Objective columns are normalized
/// by the QP oracle, constraint columns by the projected pdg controller.
pub fn compare(s: &Scenario) -> Result<(CompareReport, Vec<SimLog>), SimError> {
    let mut logs = Vec::new();
    let mut uncertified = Vec::new();
    for kind in ControllerKind::ALL {
        let mut cfg = SimConfig::from_scenario(s, kind);
        let cert = if kind.is_pdg() { Some(certificate_for(s, kind)?) } else { None };
        let infeasible = cert.as_ref().is_some_and(|c| !c.feasible);
        cfg.allow_uncertified = kind == ControllerKind::Pdg;
        if infeasible && !cfg.allow_uncertified {
            return Err(SimError::Uncertified { lambda_max: cert.as_ref().unwrap().lambda_max_star });
        }
        uncertified.push(infeasible);
        logs.push(simulate(&cfg, s, cert.as_ref())?);
    }
    let raw: Vec<Metrics> = logs.iter().map(metrics).collect();
    let oracle = raw[4];
    let proj = raw[1];
    let rows = ControllerKind::ALL
        .iter()
        .zip(&raw)
        .zip(&logs)
        .zip(&uncertified)
        .map(|(((kind, m), log), unc)| CompareRow {
            controller: *kind,
            raw: *m,
            normalized: m.normalized(&oracle, &proj),
            completed: log.completed(),
            uncertified: *unc,
            final_relative_error: log.final_relative_error(),
        })
        .collect();
    Ok((
        CompareReport {
            case_name: s.config.name.clone(),
            config_digest: s.config.digest(),
            objective_denominator: ControllerKind::MpcOracle,
            constraint_denominator: ControllerKind::PdgProj,
            rows,
        },
        logs,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub controller: ControllerKind,
    pub repetitions: usize,
    /// Seconds per sampling period.
    pub mean_step_time: f64,
    pub max_step_time: f64,
    /// `mean_step_time / mean_iter`.
    pub time_per_iter: f64,
    /// `mean_step_time × max_iter / mean_iter`.
    pub estimated_max_time: f64,
    pub max_iter: usize,
    pub mean_iter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub case_name: String,
    pub config_digest: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, kind: ControllerKind) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.controller == kind)
    }
}

/// Times every controller kind over `repetitions` runs after one warm-up
/// run. Controllers whose certificate is infeasible are skipped.
pub fn bench(s: &Scenario, kinds: &[ControllerKind], repetitions: usize) -> Result<BenchReport, SimError> {
    if repetitions < 10 {
        return Err(SimError::TooFewRepetitions(repetitions));
    }
    let mut rows = Vec::new();
    for &kind in kinds {
        let cert = if kind.is_pdg() { Some(certificate_for(s, kind)?) } else { None };
        if cert.as_ref().is_some_and(|c| !c.feasible) {
            continue;
        }
        let cfg = SimConfig::from_scenario(s, kind);
        let mut all = Vec::new();
        let mut iters = Vec::new();
        for rep in 0..=repetitions {
            let (log, t) = simulate_timed(&cfg, s, cert.as_ref())?;
            if rep == 0 {
                continue;
            }
            all.extend(t);
            iters.extend(log.iterations);
        }
        let mean_step_time = all.iter().sum::<f64>() / all.len() as f64;
        let max_step_time = all.iter().copied().fold(0.0, f64::max);
        let max_iter = iters.iter().copied().max().unwrap_or(0);
        let mean_iter = iters.iter().sum::<usize>() as f64 / iters.len() as f64;
        rows.push(BenchRow {
            controller: kind,
            repetitions,
            mean_step_time,
            max_step_time,
            time_per_iter: mean_step_time / mean_iter,
            estimated_max_time: mean_step_time * max_iter as f64 / mean_iter,
            max_iter,
            mean_iter,
        });
    }
    Ok(BenchReport { case_name: s.config.name.clone(), config_digest: s.config.digest(), rows })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// CSV with columns `t, x1..xn, u1..um, gamma, backtracks, V, h_obj, h_con`.
pub fn export_csv(log: &SimLog, path: &Path) -> Result<(), SimError> {
    let n = log.x_ref.len();
    let m = log.u_ref.len();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend(["gamma", "backtracks", "V", "h_obj", "h_con"].map(String::from));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for k in 0..log.len() {
        let mut row = vec![log.times[k].to_string()];
        row.extend(log.states[k].iter().map(|v| v.to_string()));
        row.extend(log.inputs[k].iter().map(|v| v.to_string()));
        row.push(log.gammas[k].to_string());
        row.push(log.backtracks[k].to_string());
        row.push(log.v_values[k].to_string());
        row.push(log.horizon_objectives[k].to_string());
        row.push(log.horizon_violations[k].to_string());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Writes any serializable report as pretty JSON.
pub fn export_json<T: Serialize>(value: &T, path: &Path) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn import_log(path: &Path) -> Result<SimLog, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}
