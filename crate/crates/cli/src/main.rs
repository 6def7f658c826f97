//! `wavefm`: generate corpora, pre-train, fine-tune, evaluate and benchmark.
//!
//! Exit codes: 0 success, 1 runtime or training failure, 2 usage or
//! configuration error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "wavefm",
    version,
    about = "Foundation-model workflow for 2-channel wireless timeseries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize the IQ technology corpus and the CIR ranging corpus.
    GenData(GenData),
    /// Supervised or masked self-supervised pre-training.
    Pretrain(Pretrain),
    /// Fine-tune the last encoder layer and a fresh head.
    Finetune(Finetune),
    /// Evaluate a checkpoint on its test split.
    Eval(Eval),
    /// Patch-size sweep: accuracy, time per epoch, activations, attention cost.
    Bench(Bench),
}

/// Overrides applied after the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenData {
    /// Technology/environment catalog (TOML); the shipped catalog when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Records per class, overriding the catalog.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Train/val/test ratios stored with each container.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub split: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("objective").required(true).args(["ssl", "supervised"])))]
pub struct Pretrain {
    /// Corpus container directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub ssl: bool,
    #[arg(long)]
    pub supervised: bool,
    /// Class held out of pre-training.
    #[arg(long)]
    pub exclude_class: Option<String>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskArg {
    Cls,
    Reg,
}

#[derive(Args, Debug)]
pub struct Finetune {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Fine-tuning training records per class.
    #[arg(long)]
    pub samples_per_class: Option<usize>,
    /// Cap on each class's share of the fine-tuning pool.
    #[arg(long)]
    pub max_per_class: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Args, Debug)]
pub struct Eval {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for report.json / report.txt; stdout only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Bench {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = wavefm::eval::DEFAULT_PATCH_SIZES)]
    pub patch_sizes: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Records per class drawn from the corpus split.
    #[arg(long)]
    pub max_per_class: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
