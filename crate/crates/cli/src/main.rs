//! `pmm-lab`: exact analysis, reachability certificates, simulation and
//! hydrodynamic comparisons for exchange dynamics with kinetic constraints.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or input error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use pmm_core::hydro::Profile;
use pmm_core::ConstraintFamily;
use serde::Serialize;

use crate::manifest::{RunManifest, Sink};

#[derive(Parser, Debug)]
#[command(name = "pmm-lab", version, about = "Kinetically constrained exchange dynamics toolkit")]
pub struct Cli {
    /// Constraint family as JSON; defaults to the porous medium model.
    #[arg(long, global = true)]
    pub family: Option<PathBuf>,
    /// Worker threads for parallel subcommands.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output prefix; files are written as `<prefix>.<name>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check a constraint family against the structural assumptions.
    Validate(ValidateArgs),
    /// Classify configurations (finite windows or "(100)* 11 (100)*").
    Classify(ClassifyArgs),
    /// Find a jump path between two configurations, or run a certificate.
    Connect(ConnectArgs),
    /// Exact generator, stationary measures and balance checks.
    Exact(ExactArgs),
    /// Kinetic Monte Carlo on a ring.
    Simulate(SimulateArgs),
    /// Compare simulated density profiles with the porous medium equation.
    Hydro(HydroArgs),
    /// Relative entropy and dissipation functionals of a ring measure.
    Entropy(EntropyArgs),
    /// Run the command recorded in a manifest again.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Classify(_) => "classify",
            Command::Connect(_) => "connect",
            Command::Exact(_) => "exact",
            Command::Simulate(_) => "simulate",
            Command::Hydro(_) => "hydro",
            Command::Entropy(_) => "entropy",
            Command::Replay(_) => "replay",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Simulate(a) => Some(a.seed),
            Command::Hydro(a) => Some(a.seed),
            _ => None,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            Command::Simulate(a) => a.seed = seed,
            Command::Hydro(a) => a.seed = seed,
            _ => {}
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ValidateArgs {
    /// Print the family table as JSON instead of the report.
    #[arg(long)]
    pub emit: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ClassifyArgs {
    /// Configurations: 0/1 strings, or eventually periodic words.
    #[arg(required = true)]
    pub configs: Vec<String>,
    /// First site of finite windows.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub start: i64,
    /// Treat finite windows as rings.
    #[arg(long)]
    pub ring: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Equal-count configurations with a mobile cluster are connected.
    GoodSet,
    /// Non-frozen configurations with all particles in [-n, n].
    Particles,
    /// Configurations with all holes in [-n+2, n-2].
    Holes,
    /// Planner paths replay for every equal-count pair.
    Planner,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(ArgGroup::new("mode").required(true).args(["from", "certify"])))]
pub struct ConnectArgs {
    /// Start configuration (0/1 string).
    #[arg(requires = "to")]
    pub from: Option<String>,
    /// Target configuration.
    pub to: Option<String>,
    /// First site of the window.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub start: i64,
    /// Use breadth-first search even when the planner applies.
    #[arg(long)]
    pub bfs: bool,
    /// Run an exhaustive certificate for window parameter n.
    #[arg(long, conflicts_with = "from")]
    pub certify: Option<usize>,
    #[arg(long, value_enum, default_value_t = Suite::GoodSet)]
    pub suite: Suite,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(ArgGroup::new("window").required(true).args(["ring", "interval"])))]
pub struct ExactArgs {
    /// Ring of L sites.
    #[arg(long)]
    pub ring: Option<usize>,
    /// Interval of L sites with empty boundary.
    #[arg(long)]
    pub interval: Option<usize>,
    /// Restrict to configurations with k particles.
    #[arg(long)]
    pub count: Option<usize>,
    /// Densities of the product reference measure (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(group(ArgGroup::new("initial").required(true).args(["rho", "init"])))]
pub struct SimulateArgs {
    /// Ring length (taken from --init when given).
    #[arg(long)]
    pub ring: Option<usize>,
    /// Bernoulli initial density.
    #[arg(long)]
    pub rho: Option<f64>,
    /// File holding the initial configuration as a 0/1 string.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub horizon: f64,
    /// Number of sampling intervals; snapshots are taken at k+1 times.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, env = "PMM_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HydroArgs {
    /// Ring length L.
    #[arg(long = "L", default_value_t = 512)]
    pub len: usize,
    #[arg(long, default_value_t = 200)]
    pub replicas: usize,
    /// Macroscopic time; the simulation runs to L² times this.
    #[arg(long, default_value_t = 0.05)]
    pub tmacro: f64,
    #[arg(long, value_parser = parse_profile, default_value = "step")]
    pub profile: Profile,
    #[arg(long, default_value_t = 64)]
    pub blocks: usize,
    /// Cells of the PDE grid.
    #[arg(long, default_value_t = 512)]
    pub cells: usize,
    #[arg(long, env = "PMM_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Fail when the L² discrepancy exceeds this value.
    #[arg(long)]
    pub max_l2: Option<f64>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: pmm_core::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    /// Bernoulli product measure.
    Mu,
    /// Uniform measure on one communicating class.
    UniformClass,
    /// Weights read from --input.
    File,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EntropyArgs {
    #[arg(long)]
    pub ring: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = MeasureKind::Mu)]
    pub measure: MeasureKind,
    /// JSON array of 2^L weights indexed by configuration bits.
    #[arg(long, required_if_eq("measure", "file"))]
    pub input: Option<PathBuf>,
    /// Member of the class for --measure uniform-class (default: largest
    /// non-frozen class).
    #[arg(long)]
    pub class_of: Option<String>,
    /// Window length (default: the ring length).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub offset: i64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Result of a subcommand that ran to completion.
pub enum Status {
    Ok,
    CheckFailed(String),
}

fn load_family(path: Option<&PathBuf>) -> Result<ConstraintFamily> {
    match path {
        None => Ok(ConstraintFamily::pmm()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ConstraintFamily::from_json(&text).with_context(|| format!("loading family {}", p.display()))
        }
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<Status> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cli = cli;
    let mut argv = argv;
    if let Command::Replay(r) = &cli.command {
        let m = RunManifest::load(&r.manifest)?;
        let mut full = vec!["pmm-lab".to_string()];
        full.extend(m.argv.iter().cloned());
        let mut inner = Cli::try_parse_from(&full).context("manifest arguments no longer parse")?;
        if matches!(inner.command, Command::Replay(_)) {
            bail!("a manifest cannot record a replay");
        }
        if let Some(seed) = m.seed {
            inner.command.set_seed(seed);
        }
        if cli.out.is_some() {
            inner.out = cli.out.clone();
        }
        let family = load_family(inner.family.as_ref())?;
        if family.fingerprint() != m.family_fingerprint {
            bail!("constraint family changed since the manifest was written");
        }
        argv = m.argv;
        cli = inner;
    }
    let family = load_family(cli.family.as_ref())?;
    let params = serde_json::to_value(&cli.command)?;
    let mut sink = Sink::new(cli.out.clone())?;
    let status = commands::run(&cli.command, &family, &mut sink)?;
    sink.finish(RunManifest {
        subcommand: cli.command.name().to_string(),
        argv,
        params,
        seed: cli.command.seed(),
        family_fingerprint: family.fingerprint(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: Vec::new(),
    })?;
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match execute(cli, argv) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
