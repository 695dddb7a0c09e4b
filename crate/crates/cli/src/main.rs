//! `graphmean`: low-rank estimation of the mean of a graph population.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a
//! numerical routine fails.

mod commands;
mod manifest;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{CrossValidateArgs, DimselectArgs, EmbedArgs, EstimateArgs, PermTestArgs, ReSweepArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "graphmean", version, about = "Low-rank estimation of the mean of a graph population")]
struct Cli {
    /// Worker threads for replicate-level parallelism; 0 uses every core.
    #[arg(long, global = true, env = "GRAPHMEAN_THREADS")]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the mean graph of a batch (sample mean or low-rank).
    Estimate(EstimateArgs),
    /// Spectral embedding of a single matrix.
    Embed(EmbedArgs),
    /// Report the dimension a selector picks for a batch.
    Dimselect(DimselectArgs),
    /// Sample a batch of graphs from a stochastic blockmodel.
    SimulateSbm(SimulateArgs),
    /// Monte Carlo relative-efficiency sweep over N on a blockmodel.
    ReSweep(ReSweepArgs),
    /// Held-out cross-validation of the two estimators on a batch.
    CrossValidate(CrossValidateArgs),
    /// Spatially constrained permutation test for label structure.
    PermTest(PermTestArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<graphmean::Error>())
        .any(graphmean::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let start = Instant::now();
    let (name, record) = match &cli.command {
        Command::Estimate(a) => ("estimate", commands::estimate(a)?),
        Command::Embed(a) => ("embed", commands::embed(a)?),
        Command::Dimselect(a) => ("dimselect", commands::dimselect(a)?),
        Command::SimulateSbm(a) => ("simulate-sbm", commands::simulate_sbm(a)?),
        Command::ReSweep(a) => ("re-sweep", commands::re_sweep(a)?),
        Command::CrossValidate(a) => ("cross-validate", commands::cross_validate(a)?),
        Command::PermTest(a) => ("perm-test", commands::perm_test(a)?),
    };
    if let Some(record) = record {
        manifest::write(name, record, start.elapsed())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
