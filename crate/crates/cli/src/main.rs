//! `stategrid`: decode, train, evaluate, build priors, lint, and tune.
//!
//! Every command reads tab-separated versioned artifacts, merges its
//! configuration from defaults, an optional TOML file, and flags (in that
//! precedence order), parallelizes across paragraphs, and writes outputs
//! atomically with the effective config echoed into the header.
//!
//! Exit codes: 0 success, 2 schema or configuration errors, 3 data or
//! constraint inconsistencies (pruned gold paths, misaligned files, lint
//! findings).

mod commands;
mod config;

use clap::{ArgGroup, Args, Parser, Subcommand};
use stategrid::ingest::IngestError;
use stategrid::{DecodeError, EvalError};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "stategrid",
    version,
    about = "Globally consistent entity state-change decoding for procedural text"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode a dataset into a predictions file.
    Decode(DecodeArgs),
    /// Fit the lexical scorer on gold grids and write a model file.
    Train(TrainArgs),
    /// Score a predictions file against a gold dataset.
    Eval(EvalArgs),
    /// Mine a prior table from semantic frames and a rulebase.
    Priors(PriorsArgs),
    /// Audit grids or predictions against the hard rules.
    Lint(LintArgs),
    /// Grid-search lambda, x0, and the density caps on a dev split.
    Tune(TuneArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config file; command-line flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed recorded in headers and used by training.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on worker threads for per-paragraph parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("scores").required(true)))]
struct DecodeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file (paragraphs with initial state rows).
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Per-step logits file (exactly one of --logits/--model).
    #[arg(long, value_name = "FILE", group = "scores")]
    logits: Option<PathBuf>,
    /// Lexical scorer weights to produce logits from text.
    #[arg(long, value_name = "FILE", group = "scores")]
    model: Option<PathBuf>,
    /// Prior table mixed into scores while soft scoring is on.
    #[arg(long, value_name = "FILE")]
    priors: Option<PathBuf>,
    /// Output predictions file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Disable the hard rules during search.
    #[arg(long)]
    no_hard: bool,
    /// Drop the prior term from expansion scores.
    #[arg(long)]
    no_soft: bool,
    /// Beam width override.
    #[arg(long)]
    beam: Option<usize>,
    /// Mixing weight on logits in [0, 1]; the rest goes to log-priors.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file; every paragraph must carry a gold grid.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Prior table mixed into the training loss.
    #[arg(long, value_name = "FILE")]
    priors: Option<PathBuf>,
    /// Output model file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Epoch count override.
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning-rate override.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Mixing weight on logits when --priors is given.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gold dataset; every paragraph must carry a gold grid.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Predictions file to score.
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Optional report file; the human-readable table always prints.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PriorsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mined semantic frames.
    #[arg(long, value_name = "FILE")]
    frames: PathBuf,
    /// Rulebase mapping frames to state changes.
    #[arg(long, value_name = "FILE")]
    rules: PathBuf,
    /// Logistic midpoint override.
    #[arg(long)]
    x0: Option<f64>,
    /// Flat no-change prior override, strictly inside (0, 1).
    #[arg(long)]
    none_prior: Option<f64>,
    /// Output prior table file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LintArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset file; audited directly when --pred is absent.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Predictions to audit instead of the dataset's gold grids.
    #[arg(long, value_name = "FILE")]
    pred: Option<PathBuf>,
    /// Optional report file; defaults to stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("scores").required(true)))]
struct TuneArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dev dataset; every paragraph must carry a gold grid.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Per-step logits file (exactly one of --logits/--model).
    #[arg(long, value_name = "FILE", group = "scores")]
    logits: Option<PathBuf>,
    /// Lexical scorer weights to produce logits from text.
    #[arg(long, value_name = "FILE", group = "scores")]
    model: Option<PathBuf>,
    /// Prior table; without it the x0 grid has no effect.
    #[arg(long, value_name = "FILE")]
    priors: Option<PathBuf>,
    /// Output config file for the best grid point.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Lambda grid (comma-separated); defaults to 0,0.1,...,1.
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    /// x0 grid (comma-separated); defaults to the configured x0.
    #[arg(long, value_delimiter = ',')]
    x0s: Vec<f64>,
    /// Grid over the per-sentence entity-change cap fraction.
    #[arg(long, value_delimiter = ',')]
    entity_fracs: Vec<f64>,
    /// Grid over the per-entity sentence-change cap fraction.
    #[arg(long, value_delimiter = ',')]
    sentence_fracs: Vec<f64>,
    /// Beam width override.
    #[arg(long)]
    beam: Option<usize>,
}

/// Anything a command can fail with, mapped onto the exit-code contract:
/// schema and configuration problems exit 2, data and constraint
/// inconsistencies exit 3.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Train(#[from] stategrid::scorer::TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    /// Inputs parse but disagree with each other or with the task
    /// (missing gold grids, uncovered paragraphs, ...).
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Ingest(e) => match e {
                IngestError::Alignment { .. } => 3,
                _ => 2,
            },
            CliError::Decode(e) => match e {
                DecodeError::InvalidConfig(_) => 2,
                _ => 3,
            },
            CliError::Train(_) | CliError::Eval(_) | CliError::Data(_) => 3,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("stategrid: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let common = match &cli.command {
        Command::Decode(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Priors(a) => &a.common,
        Command::Lint(a) => &a.common,
        Command::Tune(a) => &a.common,
    };
    let file = match &common.config {
        Some(path) => config::load_file(path)?,
        None => config::FileConfig::default(),
    };
    let mut cfg = config::merge(&file);
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Decode(args) => commands::decode(&args, cfg),
        Command::Train(args) => commands::train(&args, cfg),
        Command::Eval(args) => commands::eval(&args, cfg),
        Command::Priors(args) => commands::priors(&args, cfg),
        Command::Lint(args) => commands::lint(&args, cfg),
        Command::Tune(args) => commands::tune(&args, cfg),
    }
}
