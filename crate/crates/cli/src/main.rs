//! `hierdoc` command-line entry point.
//!
//! Exit codes: 0 success, 1 other failure (including any failed sweep run),
//! 2 malformed corpus, 3 config error, 4 data/embedding/checkpoint mismatch,
//! 5 gradient check failure.

mod commands;
mod failure;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "hierdoc", version, about = "Hierarchical LSTM news classifier")]
struct Cli {
    /// Output directory for run artifacts.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Log only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a corpus, print its class histogram and optionally cache embeddings.
    Prepare(PrepareArgs),
    /// Train one configuration and write a run directory.
    Train(TrainArgs),
    /// Score a trained run on a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Classify one document with a trained run.
    Predict(PredictArgs),
    /// Compare analytic gradients with central differences at toy sizes.
    Gradcheck(GradcheckArgs),
    /// Train every configuration in a manifest and tabulate the results.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// JSONL corpus (`id`, `text`, `category`).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub corpus: Option<PathBuf>,
    /// Take corpus, geometry and embedding dim from a run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Geometry preset (`DE_600`) or `SxW`.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Hashed embedding dimension for `--emb1`.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Write pad-after hashed embeddings of every document as EMB1.
    #[arg(long)]
    pub emb1: Option<PathBuf>,
    /// Write the loaded corpus as JSONL.
    #[arg(long)]
    pub write_corpus: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dotted-key override, e.g. `train.batch_size=1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Labeled corpus to score in full; defaults to the run's validation split.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Run directory written by `train`.
    #[arg(long, required_unless_present = "checkpoint")]
    pub run: Option<PathBuf>,
    /// PRM1 checkpoint; `config.json` must sit next to it.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Document text; read from `--file` or stdin when absent.
    #[arg(long, conflicts_with = "file")]
    pub text: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Document id, used to find the record in a precomputed EMB1 file.
    #[arg(long, default_value = "input")]
    pub id: String,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Run config whose model section is checked; toy sizes otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Versions to check (default: all three, or the config's version).
    #[arg(long = "version", value_name = "VER")]
    pub versions: Vec<String>,
    /// Double the output-layer gradient; the check must then fail.
    #[arg(long)]
    pub inject_fault: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// JSON array of run configs.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Runs trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).init();
    let result = match &cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a, &cli.out),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Predict(a) => commands::predict(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Sweep(a) => commands::sweep(a, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
