//! `simlearn` command line.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simlearn::ErrorClass;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "simlearn", version, about = "Train and benchmark similarity measures for case retrieval")]
struct Cli {
    /// JSON run configuration; flags given on the command line override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Dataset directory holding manifest.json [env: SIMLEARN_DATA_DIR]
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    /// Worker threads for cross-validation tasks [default: all cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download datasets listed in the manifest and verify their digests.
    Fetch {
        /// `all` or comma separated dataset ids.
        #[arg(long, default_value = "all")]
        datasets: String,
        /// Only verify files already in place.
        #[arg(long)]
        offline: bool,
        /// Download again even when a verified copy exists.
        #[arg(long)]
        force: bool,
    },
    /// Train one measure on one cross-validation split and save it.
    Train {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        measure: String,
        /// Split index in `0..folds*repeats`.
        #[arg(long)]
        split: Option<usize>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Retrieval loss of a saved model on the validation rows of its split.
    Eval {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Defaults to the dataset the model was trained on.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        split: Option<usize>,
    },
    /// Cross-validated retrieval loss for every dataset, measure and epoch budget.
    Benchmark {
        #[arg(long)]
        datasets: Option<String>,
        #[arg(long)]
        measures: Option<String>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// eSNN loss over an evenly spaced grid of alpha values in [0, 1].
    SweepAlpha {
        #[arg(long)]
        dataset: String,
        /// Number of grid points.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// eSNN training and validation curves under each optimizer.
    CompareOptimizers {
        #[arg(long)]
        dataset: String,
        /// Comma separated subset of rprop, adam, rmsprop.
        #[arg(long)]
        optimizers: Option<String>,
        /// Record validation loss every this many epochs.
        #[arg(long)]
        validate_every: Option<usize>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Embeddings of a saved model, projected onto two principal components.
    ExportEmbeddings {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
        /// Export every row instead of the validation rows of the model's split.
        #[arg(long)]
        all_rows: bool,
        /// Use the model's architecture and seed without its trained weights.
        #[arg(long)]
        untrained: bool,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Training and cross-validation flags shared by several commands.
#[derive(Debug, Clone, Default, Args)]
struct Knobs {
    /// Comma separated epoch budgets.
    #[arg(long, value_delimiter = ',')]
    epochs: Option<Vec<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// rprop, adam or rmsprop.
    #[arg(long)]
    optimizer: Option<String>,
    /// ordered-full, unordered-unique or sampled:<count>.
    #[arg(long)]
    pair_mode: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Refit normalization on each training partition.
    #[arg(long)]
    strict: bool,
    /// Output path (a file for train, a directory otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Knobs {
    fn into_config(self, command: &str) -> simlearn::Result<RunConfig> {
        let optimizer = match self.optimizer {
            Some(name) => Some(simlearn::optim::OptimizerConfig::with_kind(name.parse()?)),
            None => None,
        };
        Ok(RunConfig {
            command: Some(command.into()),
            epochs: self.epochs,
            alpha: self.alpha,
            optimizer,
            pair_mode: self.pair_mode,
            folds: self.folds,
            repeats: self.repeats,
            seed: self.seed,
            strict: self.strict.then_some(true),
            out: self.out,
            ..Default::default()
        })
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Runtime => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
