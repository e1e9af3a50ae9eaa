//! Run configuration: one JSON document describing plant, target, horizon
//! problem, controller gains and the simulation run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certify::{CertVariant, InputMap, ObjectiveBlock, SmoothnessBound};
use crate::model::{self, ContinuousPlant, DiscretePlant, SteadyTarget};
use crate::numkit::Matrix;
use crate::ocp::{build_objective, ObjectiveForm, OcpSpec, WeightOrder};
use crate::pdg::{InequalityOn, PdgParams, DEFAULT_BACKTRACK_CAP};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub x_ref: Vec<f64>,
    /// Physical upper bound on each input.
    pub u_upper: Vec<f64>,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
}

fn default_steady_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcpConfig {
    pub horizon: usize,
    pub dtau: f64,
    pub state_weight: f64,
    pub input_weight: f64,
    #[serde(default)]
    pub weight_order: WeightOrder,
    #[serde(default)]
    pub objective: ObjectiveForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub dt: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_true")]
    pub projection: bool,
    #[serde(default)]
    pub inequality_on: InequalityOn,
    /// `P` or `sigma`.
    #[serde(default)]
    pub variant: ObjectiveBlock,
    #[serde(default)]
    pub smoothness: SmoothnessBound,
    /// Run with `γ ≡ 1`.
    #[serde(default)]
    pub disable_backtracking: bool,
    #[serde(default = "default_cap")]
    pub backtrack_cap: usize,
}

fn default_c() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_cap() -> usize {
    DEFAULT_BACKTRACK_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Physical initial state; defaults to the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default = "default_reps")]
    pub bench_repetitions: usize,
}

fn default_duration() -> f64 {
    3.0
}

fn default_reps() -> usize {
    10
}

impl Default for RunSection {
    fn default() -> Self {
        Self { duration: default_duration(), x0: None, seed: 0, output_dir: None, bench_repetitions: default_reps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub plant: PlantConfig,
    pub target: TargetConfig,
    pub ocp: OcpConfig,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub run: RunSection,
}

/// `(ζ, Δt)` of the five DC-motor cases.
pub const DC_MOTOR_CASES: [(f64, f64); 5] = [(1.0, 1e-3), (10.0, 1e-3), (100.0, 1e-3), (1000.0, 1e-3), (1000.0, 1e-4)];

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// DC-motor case `1..=5`.
    pub fn dc_motor_case(case: usize) -> Self {
        assert!((1..=5).contains(&case), "DC-motor cases are numbered 1 to 5");
        let (zeta, dt) = DC_MOTOR_CASES[case - 1];
        let plant = model::dc_motor();
        Self {
            name: format!("case{case}"),
            plant: PlantConfig { a: plant.a.to_rows(), b: plant.b.to_rows() },
            target: TargetConfig { x_ref: vec![200.0 / 3.0, 5.0], u_upper: vec![160.0], steady_tol: default_steady_tol() },
            ocp: OcpConfig {
                horizon: 30,
                dtau: 0.1,
                state_weight: 1.0,
                input_weight: 0.1,
                weight_order: WeightOrder::Physical,
                objective: ObjectiveForm::WeightedNorm,
            },
            controller: ControllerConfig {
                alpha: 0.2,
                beta: 0.1,
                zeta,
                dt,
                c: default_c(),
                projection: true,
                inequality_on: InequalityOn::Projected,
                variant: ObjectiveBlock::Hessian,
                smoothness: SmoothnessBound::Quadratic,
                disable_backtracking: false,
                backtrack_cap: DEFAULT_BACKTRACK_CAP,
            },
            run: RunSection::default(),
        }
    }

    /// Dimension and range checks, naming the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.plant.a.len();
        if n == 0 || self.plant.a.iter().any(|r| r.len() != n) {
            return Err(field("plant.a", "must be a non-empty square matrix"));
        }
        if self.plant.b.len() != n {
            return Err(field("plant.b", format!("must have {n} rows to match plant.a")));
        }
        let m = self.plant.b[0].len();
        if m == 0 || self.plant.b.iter().any(|r| r.len() != m) {
            return Err(field("plant.b", "rows must have equal, non-zero length"));
        }
        if self.target.x_ref.len() != n {
            return Err(field("target.x_ref", format!("has {} entries, plant has {n} states", self.target.x_ref.len())));
        }
        if self.target.u_upper.len() != m {
            return Err(field("target.u_upper", format!("has {} entries, plant has {m} inputs", self.target.u_upper.len())));
        }
        if !(self.target.steady_tol > 0.0) {
            return Err(field("target.steady_tol", "must be positive"));
        }
        if self.ocp.horizon == 0 {
            return Err(field("ocp.horizon", "must be at least 1"));
        }
        if !(self.ocp.dtau > 0.0) {
            return Err(field("ocp.dtau", "must be positive"));
        }
        if !(self.ocp.state_weight > 0.0) {
            return Err(field("ocp.state_weight", "must be positive"));
        }
        if !(self.ocp.input_weight > 0.0) {
            return Err(field("ocp.input_weight", "must be positive"));
        }
        let c = &self.controller;
        for (name, v, ok) in [
            ("controller.alpha", c.alpha, c.alpha > 0.0),
            ("controller.beta", c.beta, c.beta >= 0.0),
            ("controller.zeta", c.zeta, c.zeta > 0.0),
            ("controller.dt", c.dt, c.dt > 0.0),
            ("controller.c", c.c, c.c > 0.0 && c.c < 1.0),
        ] {
            if !ok || !v.is_finite() {
                return Err(field(name, format!("value {v} out of range")));
            }
        }
        if !(self.run.duration > 0.0) {
            return Err(field("run.duration", "must be positive"));
        }
        if let Some(x0) = &self.run.x0 {
            if x0.len() != n {
                return Err(field("run.x0", format!("has {} entries, plant has {n} states", x0.len())));
            }
        }
        if self.run.bench_repetitions < 10 {
            return Err(field("run.bench_repetitions", "must be at least 10"));
        }
        Ok(())
    }

    pub fn params(&self) -> PdgParams {
        let c = &self.controller;
        PdgParams { alpha: c.alpha, beta: c.beta, zeta: c.zeta, dt: c.dt, c: c.c }
    }

    /// Certificate variant with the given input map.
    pub fn variant(&self, input_map: InputMap) -> CertVariant {
        CertVariant { objective_block: self.controller.variant, smoothness: self.controller.smoothness, input_map }
    }

    pub fn steps(&self) -> usize {
        (self.run.duration / self.controller.dt).round() as usize
    }
}

/// Everything derived from a [`RunConfig`] before any simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: RunConfig,
    pub plant: ContinuousPlant,
    /// Plant sampled at the controller period Δt.
    pub plant_dt: DiscretePlant,
    pub target: SteadyTarget,
    /// `ū − u_ref`.
    pub shifted_upper: Vec<f64>,
    pub spec: OcpSpec,
    pub params: PdgParams,
}

impl Scenario {
    pub fn from_config(config: &RunConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let a = Matrix::from_rows(&config.plant.a).map_err(|e| field("plant.a", e.to_string()))?;
        let b = Matrix::from_rows(&config.plant.b).map_err(|e| field("plant.b", e.to_string()))?;
        let plant = ContinuousPlant::new(a, b).map_err(|e| field("plant", e.to_string()))?;
        let target = model::steady_input(&plant, &config.target.x_ref, config.target.steady_tol)
            .map_err(|e| field("target.x_ref", e.to_string()))?;
        let shifted_upper: Vec<f64> = config.target.u_upper.iter().zip(&target.u_ref).map(|(u, r)| u - r).collect();
        let model_h = model::discretize(&plant, config.ocp.dtau).map_err(|e| field("ocp.dtau", e.to_string()))?;
        let plant_dt = model::discretize(&plant, config.controller.dt).map_err(|e| field("controller.dt", e.to_string()))?;
        let o = &config.ocp;
        let objective =
            build_objective(o.state_weight, o.input_weight, plant.n(), plant.m(), o.horizon, o.weight_order, o.objective)
                .map_err(|e| field("ocp", e.to_string()))?;
        let spec = OcpSpec::assemble(&model_h, o.horizon, objective, &shifted_upper)
            .map_err(|e| field("target.u_upper", e.to_string()))?;
        Ok(Self { config: config.clone(), plant, plant_dt, target, shifted_upper, spec, params: config.params() })
    }

    /// Initial state in error coordinates.
    pub fn x0_error(&self) -> Vec<f64> {
        let x0 = self.config.run.x0.clone().unwrap_or_else(|| vec![0.0; self.plant.n()]);
        self.target.shift_state(&x0)
    }
}
