//! `qfa`: batch driver for the automata workbench.
//!
//! Exit codes: 0 ok, 1 check failed, 2 invalid input, 3 engine error.

mod commands;
mod experiment;
mod load;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qfa", version, about = "Simulate, check, encode and compile finite automata and advised QTMs")]
struct Cli {
    /// Seed for every randomized builder.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a machine on inputs and print its statistics.
    Simulate(SimulateArgs),
    /// Look for a well-formedness witness on short inputs.
    Wfcheck(WfcheckArgs),
    /// Write the gate-level transition table of a qfa.
    Encode(EncodeArgs),
    /// Parse a transition table against a skeleton machine.
    Decode(DecodeArgs),
    /// Compile between advised QTMs and 2qfa families.
    #[command(subcommand)]
    Compile(CompileCmd),
    /// Reference problem families and their machines.
    #[command(subcommand)]
    Zoo(ZooCmd),
    /// Sweep a machine over an input set described by a JSON config.
    Experiment(ExperimentArgs),
}

/// Where a machine comes from: a spec file or a zoo builder.
#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Machine spec (qfa-spec/1 or qtm-spec/1 JSON).
    #[arg(long, conflicts_with = "zoo", required_unless_present = "zoo")]
    pub spec: Option<PathBuf>,
    /// Zoo family name.
    #[arg(long)]
    pub zoo: Option<String>,
    /// Family level for `--zoo` (defaults to the entry's own).
    #[arg(long)]
    pub n: Option<u64>,
    /// Target error for `--zoo`.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Advice function JSON, for QTM specs.
    #[arg(long, conflicts_with = "advice_string")]
    pub advice: Option<PathBuf>,
    /// Constant classical advice string, for QTM specs.
    #[arg(long)]
    pub advice_string: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Full configuration vectors including garbage history.
    Exact,
    /// Garbage traced out step by step.
    Traced,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Input word; repeat for several. Omitted means the empty word.
    #[arg(long = "input")]
    inputs: Vec<String>,
    /// Every word up to this length instead of `--input`.
    #[arg(long, conflicts_with = "inputs")]
    upto: Option<usize>,
    #[arg(long, value_enum, default_value_t = Engine::Exact)]
    engine: Engine,
    /// `bounded:EPS`, `unbounded` or `nondet`; zoo machines default to their own.
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// CSV only: one row per step instead of one per input.
    #[arg(long)]
    per_step: bool,
    /// Step cap; defaults to 1000 for automata and 5e6 for QTMs.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    residual_target: f64,
}

#[derive(Args, Debug)]
struct WfcheckArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 3)]
    maxlen: usize,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    source: Source,
    /// Per-row synthesis accuracy.
    #[arg(long, default_value_t = 0.01)]
    row_eps: f64,
    /// Table text is written here, byte for byte; stdout gets a summary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Machine whose states and alphabets fix the register layout.
    #[arg(long)]
    skeleton: PathBuf,
    #[arg(long)]
    table: PathBuf,
    /// Write the machine read back from the circuits.
    #[arg(long)]
    machine_out: Option<PathBuf>,
    /// Write the canonical re-encoding of the parsed rows.
    #[arg(long)]
    reencode: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CompileCmd {
    /// Fold a QTM and its advice for one input length into a 2qfa.
    Qtm2qfa(Qtm2QfaArgs),
    /// Build the advised interpreter QTM for a zoo family.
    Qfa2qtm(Qfa2QtmArgs),
}

#[derive(Args, Debug)]
struct Qtm2QfaArgs {
    #[arg(long)]
    qtm: PathBuf,
    #[arg(long, conflicts_with = "advice_string", required_unless_present = "advice_string")]
    advice: Option<PathBuf>,
    #[arg(long)]
    advice_string: Option<String>,
    /// Input length the machine is built for.
    #[arg(long)]
    len: usize,
    /// Family index recorded with the machine (defaults to `--len`).
    #[arg(long)]
    n: Option<usize>,
    /// Largest number of states to build.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Qfa2QtmArgs {
    #[arg(long)]
    family: String,
    /// Number of advice blocks.
    #[arg(long)]
    nbar: usize,
    /// Zoo level of block 1; block i uses level `base + i - 1`.
    #[arg(long)]
    base: Option<u64>,
    /// Error bound of the family members (zoo default if omitted).
    #[arg(long)]
    eps: Option<f64>,
    /// Fixed row accuracy; without it the advice is budgeted per `--lengths`.
    #[arg(long)]
    row_eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lengths: Vec<usize>,
    /// `length` selects block |x|; a number selects that block always.
    #[arg(long, default_value = "1")]
    block: String,
    #[arg(long)]
    out_qtm: PathBuf,
    #[arg(long)]
    out_advice: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ZooCmd {
    /// Registered families and their bounds.
    List,
    /// Build a family's reference machine.
    Build {
        name: String,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        eps: Option<f64>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment config JSON.
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<qfa_core::Error> for Failure {
    fn from(e: qfa_core::Error) -> Self {
        use qfa_core::Error as E;
        let code = match e {
            E::SpaceOverflow { .. }
            | E::CompilationTooLarge { .. }
            | E::EnumerationTooLarge(_)
            | E::DivergingLoop { .. }
            | E::NotUnitary(_)
            | E::VerificationFailed { .. } => 3,
            _ => 2,
        };
        let message = match e {
            E::InvalidSpec(v) => format!("invalid spec:\n  {}", v.join("\n  ")),
            e => e.to_string(),
        };
        Failure { code, message }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure { code: 3, message: e.to_string() }
    }
}

/// Exit status of a command that ran to completion.
pub type Outcome = Result<u8, Failure>;

fn dispatch(cli: Cli) -> Outcome {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Simulate(a) => commands::simulate(&a, seed),
        Cmd::Wfcheck(a) => commands::wfcheck(&a, seed),
        Cmd::Encode(a) => commands::encode(&a, seed),
        Cmd::Decode(a) => commands::decode(&a),
        Cmd::Compile(CompileCmd::Qtm2qfa(a)) => commands::qtm2qfa(&a),
        Cmd::Compile(CompileCmd::Qfa2qtm(a)) => commands::qfa2qtm(&a, seed),
        Cmd::Zoo(ZooCmd::List) => commands::zoo_list(),
        Cmd::Zoo(ZooCmd::Build { name, n, eps, out }) => commands::zoo_build(&name, n, eps, out.as_deref(), seed),
        Cmd::Experiment(a) => experiment::run(&a.config, a.out.as_deref(), seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
