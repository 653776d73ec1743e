//! `aif`: runs adaptive integrate-and-fire experiments described by a JSON
//! config and writes CSV/JSON tables for plotting.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "aif", version, about = "Adaptive integrate-and-fire experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Spike train: spikes.csv and summary.json.
    Simulate(RunArgs),
    /// Bifurcation diagram over a parameter: diagram.csv.
    Sweep(RunArgs),
    /// Orbit graph with its envelopes: orbit.csv and bounds.json.
    Bounds(RunArgs),
    /// Pattern class with robustness checks: classify.json.
    Classify(RunArgs),
    /// Firing rate against the cutoff per model: rates.csv.
    RateCurve(RunArgs),
    /// Divergence profile W(v) on log-spaced nodes: profile.csv.
    Profile(RunArgs),
}

fn run_with<E: serde::de::DeserializeOwned>(
    args: &RunArgs,
    run: fn(&config::Config<E>, &OutDir) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let cfg = config::load::<E>(&args.config)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    run(&cfg, &OutDir::create(Path::new(&args.out))?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run_with(a, commands::simulate),
        Command::Sweep(a) => run_with(a, commands::sweep),
        Command::Bounds(a) => run_with(a, commands::bounds),
        Command::Classify(a) => run_with(a, commands::classify),
        Command::RateCurve(a) => run_with(a, commands::rate_curve_cmd),
        Command::Profile(a) => run_with(a, commands::profile),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
