//! `srdm`: evaluate super-resolution outputs with the grouped distribution
//! metric and the surrounding tooling.

mod commands;
mod error;
mod inputs;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::settings::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "srdm",
    version,
    about = "Distribution-based evaluation of super-resolution outputs"
)]
struct Cli {
    /// Seed for grouping, shuffles and sampling [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: all cores]; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// File of `key = value` lines; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score generated HR images against ground truth
    Evaluate(commands::evaluate::EvaluateArgs),
    /// RMSE between downsampled SR images and their LR inputs
    Backproject(commands::backproject::BackprojectArgs),
    /// Glicko ratings from pairwise votes
    Rate(commands::rate::RateArgs),
    /// Correlate metric scores with ratings and back-projection error
    Correlate(commands::correlate::CorrelateArgs),
    /// Sliced Wasserstein loss between two sample lists
    Loss(commands::loss::LossArgs),
    /// Metric aggregate over a range of one design parameter
    Sweep(commands::sweep::SweepArgs),
    /// Write a synthetic LR/HR/SR dataset
    Synth(commands::synth::SynthArgs),
}

/// Settings common to every subcommand.
pub struct Context {
    pub seed: u64,
    pub file: FileConfig,
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let seed = file.pick(cli.seed, "seed", 0)?;
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => file.get::<usize>("threads")?,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(format!("cannot start {n} worker threads: {e}")))?;
    }
    let ctx = Context { seed, file };
    match cli.command {
        Command::Evaluate(a) => commands::evaluate::run(&ctx, a),
        Command::Backproject(a) => commands::backproject::run(&ctx, a),
        Command::Rate(a) => commands::rate::run(&ctx, a),
        Command::Correlate(a) => commands::correlate::run(&ctx, a),
        Command::Loss(a) => commands::loss::run(&ctx, a),
        Command::Sweep(a) => commands::sweep::run(&ctx, a),
        Command::Synth(a) => commands::synth::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
