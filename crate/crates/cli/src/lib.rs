//! The `trajair` command: process raw logs, synthesise corpora, train,
//! predict, evaluate and plot.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
pub mod config;
pub mod error;

pub use config::{RunConfig, Stamp, DATA_ROOT_ENV};
pub use error::{Category, CliError};

#[derive(Debug, Parser)]
#[command(name = "trajair", version, about = "Aircraft trajectory pipeline and predictor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn raw track logs (one file per day) and a METAR file into scene files.
    Process(ProcessArgs),
    /// Generate a synthetic traffic-pattern corpus.
    Synth(SynthArgs),
    /// Train a model on the training days of a corpus.
    Train(TrainArgs),
    /// Write sampled futures for test windows as JSON.
    Predict(PredictArgs),
    /// Best-of-N ADE/FDE on the test days, written as a JSON report.
    Eval(EvalArgs),
    /// Render a scene or a prediction as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ProcessArgs {
    /// Directory of raw track logs, one per day.
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    metar: PathBuf,
    /// Year and month (YYYY-MM) for METAR lines without a time prefix.
    #[arg(long)]
    metar_month: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML pattern spec; overrides the `[synth]` table of the config.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    scenes: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus root with one directory per day.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Stop after this many optimiser steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    min_agents: Option<usize>,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Baseline {
    ConstVelocity,
    NearestNeighbor,
}

#[derive(Debug, Args)]
#[group(id = "predictor", required = true, multiple = false, args = ["ckpt", "baseline"])]
struct PredictorArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Samples per window.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Predict at most this many test windows.
    #[arg(long, default_value_t = 10)]
    limit: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false, args = ["scene", "predictions"])]
struct PlotArgs {
    /// Scene CSV file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Which scene of the file; the first when omitted.
    #[arg(long, requires = "scene")]
    scene_id: Option<usize>,
    /// Output of `predict`.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Which prediction of the file.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Run the command line and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.category.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Process(a) => commands::process(a),
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Plot(a) => commands::plot(a),
    }
}
