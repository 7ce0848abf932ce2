use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omission_core::Model;

#[derive(Parser, Debug)]
#[command(name = "omission", version, about = "Message-adversary laboratory for consensus protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a protocol directly in one model.
    Run(RunArgs),
    /// Build a non-deciding fail-to-send execution against a protocol.
    Attack(AttackArgs),
    /// Search for agreement, validity, write-once or termination violations.
    Check(CheckArgs),
    /// Run a protocol through a stack of model simulations.
    Simulate(SimulateArgs),
    /// Replay a trace file and report divergences.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Directory for trace and report files.
    #[arg(long, env = "OMISSION_LAB_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct Exec {
    /// Protocol id, e.g. phase-king-lite or synchronizer(phase-king-lite).
    #[arg(long)]
    pub protocol: String,
    #[arg(long)]
    pub n: usize,
    /// Input vector, as `0,1,1` or `011`. Drawn from the seed when omitted.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Rounds (synchronous models) or events (asynchronous model).
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Synchronous: none | silent:P | random | random-no-silence | script:FILE.
    /// Asynchronous: round-robin | random | script:FILE.
    #[arg(long)]
    pub adversary: Option<String>,
    /// Asynchronous only: crash process P once STEP events have run.
    #[arg(long, value_name = "P@STEP")]
    pub crash: Option<String>,
    /// Asynchronous only: fairness window of the random scheduler.
    #[arg(long, default_value_t = 64)]
    pub window: u64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub model: Model,
    #[command(flatten)]
    pub exec: Exec,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long)]
    pub protocol: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 30)]
    pub rounds: u64,
    /// Forbid faults that silence the sender towards everyone.
    #[arg(long)]
    pub restricted: bool,
    /// Oracle cap in rounds; defaults to 10 n.
    #[arg(long)]
    pub cap: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exhaustive,
    Fuzz,
    Termination,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: Mode,
    #[arg(long)]
    pub protocol: String,
    #[arg(long, default_value = "fts")]
    pub model: Model,
    /// Process counts; fuzz cycles through them.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Rounds per branch (exhaustive) or per run (fuzz).
    #[arg(long, default_value_t = 4)]
    pub depth: u64,
    #[arg(long, default_value_t = 1000)]
    pub runs: u64,
    /// Maximum exhaustive branches.
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: u128,
    /// Exhaustive fts only: exclude full-silence faults.
    #[arg(long)]
    pub restricted: bool,
    /// Termination mode: rounds allowed until every process has output.
    #[arg(long, default_value_t = 6)]
    pub deadline: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Stack descriptor, top model first, e.g. fts-over-ftr-over-flp.
    #[arg(long)]
    pub stack: String,
    #[command(flatten)]
    pub exec: Exec,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[command(flatten)]
    pub common: Common,
}
