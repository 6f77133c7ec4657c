//! Command-line front end of the identification-for-control pipeline.
//!
//! Every command resolves the lab configuration (JSON file, then flags),
//! writes that snapshot next to its outputs and finishes with a JSON report
//! carrying [`SCHEMA_VERSION`]. Reports contain no timestamps, so re-running a
//! command with the same inputs reproduces them byte for byte.
//!
//! Exit codes are part of the interface: see [`Failure`] and [`Outcome`].

mod commands;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use robotlab::{JointModelKind, LabConfig, SynthMode};
use serde::Serialize;

pub use commands::{check, identify, reach, simulate, synth};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "rcsynth", version, about = "Reachset-conformant identification and controller synthesis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Lab configuration JSON; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for simulation and search (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the closed-loop lab plant and export the suites.
    Simulate(SimulateArgs),
    /// Identify W and V of model candidates on one suite.
    Identify(IdentifyArgs),
    /// Check a model for reachset conformance with a suite.
    Check(CheckArgs),
    /// Synthesize loop parameters.
    Synth(SynthArgs),
    /// Reachable-set tube or terminal set of a model.
    Reach(ReachArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Axes to simulate (1-based, comma separated); default: the config axis.
    #[arg(long, value_delimiter = ',')]
    pub axes: Vec<usize>,
    /// Seconds per trajectory.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Trajectories per axis.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    /// Suite directory; default: simulate the initial suite from the config.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Model candidates, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "model")]
    pub candidates: Vec<JointModelKind>,
    /// Identify an arbitrary model JSON instead of lab candidates; the suite
    /// must then be in the model's own state coordinates.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Identification horizon in steps.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub suite: PathBuf,
    /// Project a lab-coordinate suite onto this candidate's state first.
    #[arg(long)]
    pub candidate: Option<JointModelKind>,
    /// Last checked step of each window.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// state-feedback, observer-a1, observer-a2 or output-feedback.
    pub mode: SynthMode,
    /// Plant candidate; default RODd for state feedback, RDd for the modes
    /// whose controller carries the observer.
    #[arg(long)]
    pub candidate: Option<JointModelKind>,
    /// Initial identification suite in lab coordinates; default: simulated.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Plant runs before giving up (exit 5).
    #[arg(long, default_value_t = 5)]
    pub max_iters: usize,
    /// Evaluation budget of the parameter search.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Multi-start count of the parameter search.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Identification horizon in steps.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReachArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input trace CSV (`k,u_1..`); default: zero input.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Initial state, comma separated; default: the origin.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Last step of the tube; default: the input length minus one, or 100.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Emit the converged terminal set and its time instead of a tube.
    #[arg(long)]
    pub terminal: bool,
}

/// How a command ended when it ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Iterative synthesis declared the candidate infeasible.
    Infeasible,
    /// Iteration or search budget ran out.
    Budget,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Infeasible => 4,
            Outcome::Budget => 5,
        }
    }
}

/// A command that could not run. `code` is 2 for configuration and input
/// errors, 3 when data leave the span of the noise channels, 1 otherwise.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    pub fn internal(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }

    pub fn coverage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 3, error: error.into() }
    }
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exit {}: {:#}", self.code, self.error)
    }
}

pub type CmdResult = Result<Outcome, Failure>;

/// Lab configuration from `--config` with flag overrides applied.
pub fn resolve_config(global: &GlobalArgs) -> Result<LabConfig, Failure> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::config(anyhow::anyhow!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<LabConfig>(&text).map_err(|e| Failure::config(anyhow::anyhow!("config {}: {e}", path.display())))?
        }
        None => LabConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

/// Report envelope shared by every command.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a LabConfig,
    #[serde(flatten)]
    pub body: T,
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::internal)?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::config(anyhow::anyhow!("cannot write {}: {e}", path.display())))
}

/// Writes `<out>/<command>-report.json` and the resolved config snapshot.
pub(crate) fn finish<T: Serialize>(out: &Path, command: &str, cfg: &LabConfig, body: T) -> Result<(), Failure> {
    write_json(&out.join("config.resolved.json"), cfg)?;
    write_json(&out.join(format!("{command}-report.json")), &Report { schema_version: SCHEMA_VERSION, command, config: cfg, body })
}

pub fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.global.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = resolve_config(&cli.global)?;
    std::fs::create_dir_all(&cli.global.out)
        .map_err(|e| Failure::config(anyhow::anyhow!("cannot create output directory {}: {e}", cli.global.out.display())))?;
    let out = cli.global.out.as_path();
    match &cli.command {
        Command::Simulate(a) => simulate(&cfg, a, out),
        Command::Identify(a) => identify(&cfg, a, out),
        Command::Check(a) => check(&cfg, a, out),
        Command::Synth(a) => synth(&cfg, a, out),
        Command::Reach(a) => reach(&cfg, a, out),
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(o) => o.code(),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}
