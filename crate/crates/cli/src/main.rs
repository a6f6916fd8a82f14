//! `chanorder`: generate corpora, train and evaluate channel-order models,
//! and fix images stored with permuted channels.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

mod commands;
mod fix;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use chanorder_core::checkpoint::ModelKind;
use chanorder_core::data::Split;
use chanorder_core::Exec;

pub const CONFIG_ENV: &str = "CHANORDER_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "chanorder", version, about = "Channel-order prediction and correction")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CHANORDER_THREADS")]
    threads: Option<usize>,
    /// Run every data-parallel step on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Where to write the run manifest (each command has its own default).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Train a model on a corpus.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Predict the channel layout of images and write RGB copies.
    Fix(FixArgs),
    /// Choose the near-gray threshold that maximizes F1 on a corpus split.
    SweepTau(SweepArgs),
    /// Repeat the run recorded in a manifest.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// TOML scene spec; built-in defaults when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the spec's image height and width.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Orderer,
    Bgr,
    Softmax6,
    Softmax2,
    Shallow,
}

impl KindArg {
    pub fn kind(self) -> ModelKind {
        match self {
            KindArg::Orderer => ModelKind::Orderer,
            KindArg::Bgr => ModelKind::Bgr,
            KindArg::Softmax6 => ModelKind::Softmax6,
            KindArg::Softmax2 => ModelKind::Softmax2,
            KindArg::Shallow => ModelKind::Shallow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub corpus: PathBuf,
    /// TOML training config. Keys left out fall back to the preset.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Checkpoint path (default: `<kind>.ckpt`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch loss log, one JSON object per line (default: next to the checkpoint).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Order,
    Bgr,
    Gray,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub task: Task,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Directory for the structured report and plots.
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    /// Near-gray threshold (gray task; default depends on the model).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Chance that a grayscale test image keeps a small colored patch.
    #[arg(long, default_value_t = 0.5)]
    pub patch_probability: f64,
    /// Seed for building the near-gray test set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FixArgs {
    /// Image files or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Output directory; required unless --detect-only.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory of label maps named after the images (orderer checkpoints).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Print the predicted layout without writing images.
    #[arg(long)]
    pub detect_only: bool,
    /// Pass near-gray images through unmodified.
    #[arg(long)]
    pub gray_skip: bool,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "val")]
    pub split: SplitArg,
    #[arg(long, default_value = "reports")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub patch_probability: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A bad invocation, config or input the user can fix; exits with code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Shared run settings.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub exec: Exec,
    pub threads: usize,
    pub manifest: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<chanorder_core::Error>() {
        Some(chanorder_core::Error::Config(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = configure_threads(cli.threads, cli.sequential)?;
    let ctx = Ctx {
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
        threads,
        manifest: cli.manifest,
    };
    commands::dispatch(cli.command, &ctx, None)
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>, sequential: bool) -> anyhow::Result<usize> {
    if sequential {
        return Ok(1);
    }
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(rayon::current_num_threads())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_: Option<usize>, _: bool) -> anyhow::Result<usize> {
    Ok(1)
}
