use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pdgmpc::certify::{certify_ct, certify_dt, Certificate, InputMap, ObjectiveBlock};
use pdgmpc::config::{RunConfig, Scenario};
use pdgmpc::harness::{self, ControllerKind, SimConfig, Termination};
use pdgmpc::ocp::WeightOrder;
use pdgmpc::pdg::GammaPolicy;
use serde::Serialize;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "pdgmpc", version, about = "Certified primal-dual gradient MPC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continuous and sampled-data certificates for both input maps.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Exit with status 2 when a certificate the controller relies on is infeasible.
        #[arg(long)]
        require_feasible: bool,
    },
    /// Closed-loop run of one controller; writes CSV and JSON logs.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Kind::PdgProj)]
        controller: Kind,
        /// Run a pdg controller even if its certificate is infeasible.
        #[arg(long = "unsafe")]
        allow_unsafe: bool,
        /// Hold γ at 1 instead of backtracking.
        #[arg(long)]
        no_backtracking: bool,
    },
    /// All controllers on one scenario with normalized metrics.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Step timing and iteration counts.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Timed repetitions after one warm-up run.
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing. Defaults to `run.output_dir` or `out`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long, value_enum)]
    weight_order: Option<Order>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Sigma,
    #[value(name = "P")]
    P,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Literal,
    Physical,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pdg,
    PdgProj,
    Cgmres1,
    Cgmres2,
    MpcOracle,
}

impl From<Kind> for ControllerKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Pdg => ControllerKind::Pdg,
            Kind::PdgProj => ControllerKind::PdgProj,
            Kind::Cgmres1 => ControllerKind::Cgmres1,
            Kind::Cgmres2 => ControllerKind::Cgmres2,
            Kind::MpcOracle => ControllerKind::MpcOracle,
        }
    }
}

struct Loaded {
    scenario: Scenario,
    output: PathBuf,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(v) = self.variant {
            config.controller.variant = match v {
                Variant::Sigma => ObjectiveBlock::Sigma,
                Variant::P => ObjectiveBlock::Hessian,
            };
        }
        if let Some(o) = self.weight_order {
            config.ocp.weight_order = match o {
                Order::Literal => WeightOrder::Literal,
                Order::Physical => WeightOrder::Physical,
            };
        }
        let output = self
            .output
            .clone()
            .or_else(|| config.run.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&output).with_context(|| format!("creating {}", output.display()))?;
        let scenario = Scenario::from_config(&config)?;
        Ok(Loaded { scenario, output })
    }
}

#[derive(Serialize)]
struct CertifyReport {
    case_name: String,
    config_digest: String,
    /// Input map of the controller the config selects.
    selected_input_map: InputMap,
    continuous_projected: Certificate,
    continuous_plain: Certificate,
    discrete_projected: Certificate,
    discrete_plain: Certificate,
}

impl CertifyReport {
    fn selected(&self) -> (&Certificate, &Certificate) {
        match self.selected_input_map {
            InputMap::Projected => (&self.continuous_projected, &self.discrete_projected),
            InputMap::Plain => (&self.continuous_plain, &self.discrete_plain),
        }
    }
}

fn verdict(c: &Certificate) -> &'static str {
    if c.feasible {
        "feasible"
    } else {
        "infeasible"
    }
}

fn cmd_certify(common: &Common, require_feasible: bool) -> Result<ExitCode> {
    let Loaded { scenario: s, output } = common.load()?;
    let cfg = &s.config;
    let selected_input_map = if cfg.controller.projection { InputMap::Projected } else { InputMap::Plain };
    let report = CertifyReport {
        case_name: cfg.name.clone(),
        config_digest: cfg.digest(),
        selected_input_map,
        continuous_projected: certify_ct(&s.spec, &s.params, &s.plant, cfg.variant(InputMap::Projected))?,
        continuous_plain: certify_ct(&s.spec, &s.params, &s.plant, cfg.variant(InputMap::Plain))?,
        discrete_projected: certify_dt(&s.spec, &s.params, &s.plant_dt, cfg.variant(InputMap::Projected))?,
        discrete_plain: certify_dt(&s.spec, &s.params, &s.plant_dt, cfg.variant(InputMap::Plain))?,
    };
    say!("case {}  digest {}", report.case_name, &report.config_digest[..16]);
    say!(
        "variant: objective block {:?}, smoothness {:?}, weight order {:?}",
        cfg.controller.variant, cfg.controller.smoothness, cfg.ocp.weight_order
    );
    say!("{:<22} {:>12} {:>14}  verdict", "certificate", "delta*", "lambda_max*");
    for (name, c) in [
        ("continuous/projected", &report.continuous_projected),
        ("continuous/plain", &report.continuous_plain),
        ("discrete/projected", &report.discrete_projected),
        ("discrete/plain", &report.discrete_plain),
    ] {
        let edge = if c.boundary_hit { " (search bound)" } else { "" };
        say!("{name:<22} {:>12.4} {:>14.4}  {}{edge}", c.delta_star, c.lambda_max_star, verdict(c));
    }
    let path = output.join("certificate.json");
    harness::export_json(&report, &path)?;
    say!("wrote {}", path.display());
    let (ct, dt) = report.selected();
    if require_feasible && !(ct.feasible && dt.feasible) {
        eprintln!("selected certificate is infeasible");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config_digest: String,
    certificate: Option<&'a Certificate>,
    log: &'a harness::SimLog,
}

fn cmd_simulate(common: &Common, kind: ControllerKind, allow_unsafe: bool, no_backtracking: bool) -> Result<ExitCode> {
    let Loaded { scenario: s, output } = common.load()?;
    let mut cfg = SimConfig::from_scenario(&s, kind);
    cfg.allow_uncertified = allow_unsafe;
    if no_backtracking {
        cfg.gamma_policy = GammaPolicy::Fixed(1.0);
    }
    let cert = if kind.is_pdg() { Some(harness::certificate_for(&s, kind)?) } else { None };
    if let Some(c) = &cert {
        if !c.feasible && !allow_unsafe {
            bail!(
                "{} certificate is infeasible (lambda_max* = {:.4}); rerun with --unsafe to simulate anyway",
                kind.name(),
                c.lambda_max_star
            );
        }
    }
    let log = harness::simulate(&cfg, &s, cert.as_ref())?;
    let stem = format!("{}_{}", s.config.name, kind.name());
    let csv = output.join(format!("{stem}.csv"));
    let json = output.join(format!("{stem}.json"));
    harness::export_csv(&log, &csv)?;
    harness::export_json(&SimulateReport { config_digest: s.config.digest(), certificate: cert.as_ref(), log: &log }, &json)?;
    match &log.termination {
        Termination::Completed => {
            let m = harness::metrics(&log);
            say!(
                "{} on {}: {} steps, final relative error {:.3e}, backtrack-free {:.2}%, actual obj {:.4}, actual con {:.4e}",
                kind.name(),
                s.config.name,
                log.len(),
                log.final_relative_error(),
                100.0 * log.backtrack_free_fraction(),
                m.actual_obj,
                m.actual_con
            );
        }
        Termination::Diverged { step, state_norm } => {
            say!("{} on {}: diverged at step {step} (|x| = {state_norm:.3e})", kind.name(), s.config.name);
        }
        Termination::CertificationViolated { step, message } => {
            say!("{} on {}: stopped at step {step}: {message}", kind.name(), s.config.name);
        }
    }
    say!("wrote {} and {}", csv.display(), json.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(common: &Common) -> Result<ExitCode> {
    let Loaded { scenario: s, output } = common.load()?;
    let (report, logs) = harness::compare(&s)?;
    say!("{}", report.to_table().trim_end());
    for log in &logs {
        harness::export_csv(log, &output.join(format!("{}_{}.csv", s.config.name, log.controller.name())))?;
    }
    let path = output.join(format!("{}_compare.json", s.config.name));
    harness::export_json(&report, &path)?;
    say!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn write_bench_csv(report: &harness::BenchReport, path: &Path) -> Result<()> {
    let mut text = String::from(
        "controller,repetitions,mean_step_time,max_step_time,time_per_iter,estimated_max_time,max_iter,mean_iter\n",
    );
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.controller.name(),
            r.repetitions,
            r.mean_step_time,
            r.max_step_time,
            r.time_per_iter,
            r.estimated_max_time,
            r.max_iter,
            r.mean_iter
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_bench(common: &Common, repetitions: Option<usize>) -> Result<ExitCode> {
    let Loaded { scenario: s, output } = common.load()?;
    let reps = repetitions.unwrap_or(s.config.run.bench_repetitions);
    let report = harness::bench(&s, &ControllerKind::ALL, reps)?;
    say!(
        "{:<12} {:>14} {:>14} {:>14} {:>9} {:>9}",
        "method", "mean step [s]", "per iter [s]", "est. max [s]", "max iter", "mean iter"
    );
    for r in &report.rows {
        say!(
            "{:<12} {:>14.3e} {:>14.3e} {:>14.3e} {:>9} {:>9.2}",
            r.controller.name(),
            r.mean_step_time,
            r.time_per_iter,
            r.estimated_max_time,
            r.max_iter,
            r.mean_iter
        );
    }
    let stem = format!("{}_bench", s.config.name);
    write_bench_csv(&report, &output.join(format!("{stem}.csv")))?;
    harness::export_json(&report, &output.join(format!("{stem}.json")))?;
    say!("wrote {}", output.join(format!("{stem}.{{csv,json}}")).display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Certify { common, require_feasible } => cmd_certify(common, *require_feasible),
        Command::Simulate { common, controller, allow_unsafe, no_backtracking } => {
            cmd_simulate(common, (*controller).into(), *allow_unsafe, *no_backtracking)
        }
        Command::Compare { common } => cmd_compare(common),
        Command::Bench { common, repetitions } => cmd_bench(common, *repetitions),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
