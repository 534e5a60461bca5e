//! Command-line front end: run one case, sweep the unbalance weight,
//! validate feeder documents and check external solutions.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use phasealloc::formulation::{build_model, CaseConfig, FormulationError};
use phasealloc::network::{parse_feeder, validate, NetworkError};
use phasealloc::{fixtures, Network};

mod report;
mod sweep;

pub use report::{run_case, RunOutcome, Summary};
pub use sweep::{sweep, SweepRow};

/// Process exit codes.
pub mod exit {
    pub const OPTIMAL: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const LIMIT: i32 = 3;
    pub const INPUT: i32 = 4;
}

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "PHASEALLOC_OUT";

#[derive(Debug, Parser)]
#[command(name = "phasealloc", version, about = "Optimal phase allocation for radial three-phase feeders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case and write the solution, unbalance, reassignment and summary files.
    Run(RunArgs),
    /// Solve one case for every weight in a list and write sweep.csv.
    Sweep(SweepArgs),
    /// Parse a feeder document and list every invariant it violates.
    Validate(FeederArg),
    /// Evaluate an external solution (`name value` lines) against the model.
    CheckSolution(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FeederArg {
    /// Feeder document, or `builtin:ieee13|ieee37|ieee123`.
    #[arg(long)]
    pub feeder: String,
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    #[command(flatten)]
    pub feeder: FeederArg,
    /// Case 1, 2 or 3 (capacity multiplier 1, 2 or 3).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3), conflicts_with = "multiplier")]
    pub case: Option<u32>,
    /// Custom capacity multiplier.
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Squared-voltage lower bound, pu^2.
    #[arg(long)]
    pub vmin: Option<f64>,
    /// Squared-voltage upper bound, pu^2.
    #[arg(long)]
    pub vmax: Option<f64>,
    /// Relative optimality gap.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Wall-clock limit per solve, seconds.
    #[arg(long = "time-limit")]
    pub time_limit: Option<f64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = "phasealloc-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Weight of the unbalance term, 0 <= alpha <= 1.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also write the model in LP format to this path.
    #[arg(long = "export-model")]
    pub export_model: Option<PathBuf>,
    /// Certify the optimum by enumeration (small feeders only).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Comma-separated weights.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Solution file with one `variable value` pair per line.
    #[arg(long)]
    pub solution: PathBuf,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl fmt::Display) -> Failure {
        Failure { code: exit::INPUT, message: message.to_string() }
    }

    pub fn internal(message: impl fmt::Display) -> Failure {
        Failure { code: exit::INTERNAL, message: message.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<FormulationError> for Failure {
    fn from(e: FormulationError) -> Failure {
        match e {
            FormulationError::InfeasibleBus { .. } => Failure { code: exit::INFEASIBLE, message: e.to_string() },
            _ => Failure::input(e),
        }
    }
}

/// Read a feeder from a path or a `builtin:` name.
pub fn load_feeder(spec: &str) -> Result<Network, Failure> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return fixtures::by_name(name).ok_or_else(|| Failure::input(format!("unknown bundled feeder `{name}`")));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::input(format!("cannot read {spec}: {e}")))?;
    parse_feeder(&text).map_err(|e| Failure::input(format!("{spec}: {e}")))
}

impl CaseArgs {
    /// Case configuration with the feeder's own band, then explicit overrides.
    pub fn config(&self, net: &Network, alpha: Option<f64>) -> Result<CaseConfig, Failure> {
        let mut cfg = CaseConfig::case(self.case.unwrap_or(1)).with_band(net.voltage_band());
        if let Some(m) = self.multiplier {
            cfg.capacity_multiplier = m;
        }
        if let Some(a) = alpha {
            cfg.alpha = a;
        }
        if let Some(v) = self.vmin {
            cfg.v_min = v;
        }
        if let Some(v) = self.vmax {
            cfg.v_max = v;
        }
        if let Some(g) = self.gap {
            cfg.mip_gap = g;
        }
        cfg.time_limit = self.time_limit;
        cfg.validate().map_err(Failure::input)?;
        Ok(cfg)
    }

    /// Label of the case for reports: `1`, `2`, `3` or `custom`.
    pub fn label(&self) -> String {
        match (self.case, self.multiplier) {
            (_, Some(_)) => "custom".into(),
            (Some(k), None) => k.to_string(),
            (None, None) => "1".into(),
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::internal(format!("cannot write {}: {e}", path.display())))
}

fn validate_command(args: &FeederArg) -> Result<i32, Failure> {
    let net = if let Some(name) = args.feeder.strip_prefix("builtin:") {
        fixtures::by_name(name).ok_or_else(|| Failure::input(format!("unknown bundled feeder `{name}`")))?
    } else {
        let text = std::fs::read_to_string(&args.feeder)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", args.feeder)))?;
        match parse_feeder(&text) {
            Ok(net) => net,
            Err(NetworkError::Invalid(report)) => {
                for v in &report.violations {
                    println!("violation: {v}");
                }
                return Err(Failure::input(format!("{}: {} violation(s)", args.feeder, report.violations.len())));
            }
            Err(e) => return Err(Failure::input(format!("{}: {e}", args.feeder))),
        }
    };
    let report = validate(net.data());
    let loaded = net.buses().iter().filter(|b| b.has_load()).count();
    let (p, q) = net.total_load();
    println!("feeder {}: {} buses, {} lines, {} loaded buses", net.name(), net.bus_count(), net.lines().len(), loaded);
    println!("load kW  a {:.1}  b {:.1}  c {:.1}", p[0], p[1], p[2]);
    println!("load kVAr a {:.1}  b {:.1}  c {:.1}", q[0], q[1], q[2]);
    println!("valid: {}", report.is_valid());
    Ok(exit::OPTIMAL)
}

fn check_command(args: &CheckArgs) -> Result<i32, Failure> {
    let net = load_feeder(&args.case.feeder.feeder)?;
    let cfg = args.case.config(&net, args.alpha)?;
    let model = build_model(&net, &cfg)?;
    let text = std::fs::read_to_string(&args.solution)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", args.solution.display())))?;
    let x = phasealloc::formulation::read_solution(&model, &text).map_err(|e| Failure::input(format!("{}: {e}", args.solution.display())))?;
    let row = model.max_violation(&x);
    let bound = model
        .variables
        .iter()
        .zip(&x)
        .map(|(v, x)| (v.lower - x).max(x - v.upper).max(0.0))
        .fold(0.0, f64::max);
    let integrality = model.binaries().map(|j| (x[j] - x[j].round()).abs()).fold(0.0, f64::max);
    let feasible = row <= 1e-6 && bound <= 1e-6 && integrality <= cfg.integrality_tol;
    println!("objective {:.9}", model.objective_value(&x));
    println!("max row violation {row:.3e}");
    println!("max bound violation {bound:.3e}");
    println!("max integrality violation {integrality:.3e}");
    println!("feasible: {feasible}");
    Ok(if feasible { exit::OPTIMAL } else { exit::INFEASIBLE })
}

/// Execute a parsed command line and return the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => report::run_command(args),
        Command::Sweep(args) => sweep::sweep_command(args),
        Command::Validate(args) => validate_command(args),
        Command::CheckSolution(args) => check_command(args),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
