//! `evtcn` command line: synth, train, predict, evaluate, ensemble.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical divergence.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{load_dataset_dir, load_prediction_dir, write_prediction_dir, MANIFEST_FILE};
pub use config::{load_config_file, parse_config_text, Overrides, RunConfig, KEYS};

use crate::error::Error;
use crate::seqdata::Split;
use crate::training::Precision;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence(_) => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(name = "evtcn", version, about = "Dilated causal TCN with timestamp encoding for per-frame expression regression")]
pub struct Cli {
    /// `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for file loading and evaluation.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset as FSEQ1 files plus a manifest.
    Synth(SynthArgs),
    /// Drop unannotated frames, add positional encoding, train, write a checkpoint.
    Train(TrainArgs),
    /// Run a checkpoint over a data directory and write prediction files.
    Predict(PredictArgs),
    /// Score prediction files against labels.
    Evaluate(EvaluateArgs),
    /// Weighted average of two prediction directories.
    Ensemble(EnsembleArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    videos: Option<usize>,
    #[arg(long)]
    min_len: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Feature columns per frame.
    #[arg(long)]
    features: Option<usize>,
    /// Label columns per frame.
    #[arg(long)]
    expressions: Option<usize>,
    /// Probability that a frame is unannotated.
    #[arg(long)]
    gap_prob: Option<f64>,
    #[arg(long)]
    split: Option<Split>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Optional labeled set scored after every epoch.
    #[arg(long)]
    val_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Videos per optimizer step (gradient accumulation).
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    kernel_size: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    head_hidden: Option<usize>,
    #[arg(long)]
    pe_dim: Option<usize>,
    #[arg(long)]
    pe_base: Option<f64>,
    #[arg(long)]
    no_positional_encoding: bool,
    #[arg(long)]
    precision: Option<Precision>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Clamp exported predictions to [0, 1].
    #[arg(long)]
    clamp: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    /// Labeled FSEQ1 files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Also write the report to `<out-dir>/report.txt`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[arg(long)]
    pred_a: Option<PathBuf>,
    #[arg(long)]
    pred_b: Option<PathBuf>,
    /// Weight of `--pred-a`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

impl Command {
    fn overrides(&self) -> Overrides {
        match self {
            Command::Synth(a) => Overrides {
                out_dir: a.out_dir.clone(),
                seed: a.seed,
                videos: a.videos,
                min_len: a.min_len,
                max_len: a.max_len,
                features: a.features,
                expressions: a.expressions,
                gap_prob: a.gap_prob,
                split: a.split,
                ..Default::default()
            },
            Command::Train(a) => Overrides {
                data_dir: a.data_dir.clone(),
                val_dir: a.val_dir.clone(),
                out_dir: a.out_dir.clone(),
                seed: a.seed,
                epochs: a.epochs,
                lr: a.lr,
                batch_size: a.batch_size,
                dropout: a.dropout,
                kernel_size: a.kernel_size,
                blocks: a.blocks,
                hidden: a.hidden,
                head_hidden: a.head_hidden,
                pe_dim: a.pe_dim,
                pe_base: a.pe_base,
                no_positional_encoding: flag(a.no_positional_encoding),
                precision: a.precision,
                ..Default::default()
            },
            Command::Predict(a) => Overrides {
                checkpoint: a.checkpoint.clone(),
                data_dir: a.data_dir.clone(),
                out_dir: a.out_dir.clone(),
                clamp: flag(a.clamp),
                ..Default::default()
            },
            Command::Evaluate(a) => Overrides {
                pred_dir: a.pred_dir.clone(),
                data_dir: a.data_dir.clone(),
                out_dir: a.out_dir.clone(),
                ..Default::default()
            },
            Command::Ensemble(a) => Overrides {
                pred_a: a.pred_a.clone(),
                pred_b: a.pred_b.clone(),
                lambda: a.lambda,
                out_dir: a.out_dir.clone(),
                ..Default::default()
            },
        }
    }
}

/// Parses arguments, runs the command writing to `out`, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), (i32, String)>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    Ok(())
                }
                _ => Err((EXIT_USAGE, e.to_string())),
            };
        }
    };
    let fail = |e: Error| (exit_code(&e), format!("error: {e}"));

    let mut flags = cli.command.overrides();
    flags.threads = cli.threads;
    let file = match &cli.config {
        Some(path) => load_config_file(path).map_err(fail)?,
        None => Overrides::default(),
    };
    let cfg = RunConfig::resolve(flags.or(file)).map_err(fail)?;
    if let Some(n) = cfg.threads {
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Synth(_) => commands::cmd_synth(&cfg, out),
        Command::Train(_) => commands::cmd_train(&cfg, out),
        Command::Predict(_) => commands::cmd_predict(&cfg, out),
        Command::Evaluate(_) => commands::cmd_evaluate(&cfg, out),
        Command::Ensemble(_) => commands::cmd_ensemble(&cfg, out),
    };
    result.map_err(fail)
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(args, &mut lock) {
        Ok(()) => EXIT_OK,
        Err((code, msg)) => {
            let _ = lock.flush();
            eprintln!("{msg}");
            code
        }
    }
}
