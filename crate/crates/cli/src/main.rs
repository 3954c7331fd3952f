//! `podrom`: generate synthetic flames, fit POD bases, train forecasters,
//! predict and evaluate transfer to new datasets.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use podrom::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "podrom", version, about = "POD reduced-order models with neural forecasters")]
pub struct Cli {
    /// TOML config file with optional sections generate, pod, split, model, train, rollout.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the generator (generate) or of training (train).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "podrom_out")]
    pub out: PathBuf,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic flame dataset.
    Generate(GenerateArgs),
    /// Fit centering constants and a truncated POD basis.
    Pod(PodArgs),
    /// Train a forecaster and write a pipeline directory.
    Train(TrainArgs),
    /// Forecast with a trained pipeline, optionally scoring against truth.
    Predict(PredictArgs),
    /// Score a trained pipeline on a different dataset without retraining.
    Transfer(TransferArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProfileArg {
    /// One perturbation, A = 0.25 at 20 Hz.
    Single,
    /// Three perturbations at 10, 40 and 80 Hz.
    Three,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Replaces the profile from the config.
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
}

#[derive(Args, Debug)]
pub struct PodArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Keep this many modes.
    #[arg(long, conflicts_with = "energy")]
    pub modes: Option<usize>,
    /// Keep the fewest modes reaching this energy fraction, in (0, 1].
    #[arg(long)]
    pub energy: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Lstm,
    Cnn,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory written by `podrom pod`; without it the basis is fitted here.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// Training case preset (0, A, B, C, D, E by default).
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Maximum number of epochs; patience is capped to it.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// LSTM hidden width.
    #[arg(long)]
    pub units: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Number of snapshots to forecast; defaults to the test-split length.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Full dataset the pipeline was trained on, for metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Grid probes, e.g. "(3,4) (10,2)", exported as time series.
    #[arg(long)]
    pub export_points: Option<String>,
}

#[derive(Args, Debug)]
pub struct TransferArgs {
    #[arg(long)]
    pub pipeline: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Feed true snapshots into every forward call instead of rolling out.
    #[arg(long)]
    pub teacher_forced: bool,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Numeric => 3,
        ErrorClass::Io => 4,
        ErrorClass::Input => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
