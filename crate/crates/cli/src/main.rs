use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rtsvd_cli::commands;
use rtsvd_cli::config::{CommonArgs, RunConfig};

/// Randomized t-SVD for third-order tensors.
#[derive(Parser, Debug)]
#[command(name = "rtsvd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factor a TT3F tensor and write U.tt3, S.tt3, V.tt3 and report.json
    /// into the --out directory.
    Decompose {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Error statistics over seeded trials for every (k, q) pair.
    BenchError {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cross-validated recognition; writes report.json, table.csv and
    /// timing.csv into the --out directory.
    Recognize {
        /// Image directory, or a TT3F file used with --labels.
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-trial recognition rates as CSV or JSON.
    CrossValidate {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Describe a TT3F file or an image directory.
    Info {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Decompose { input, common } => {
            let cfg = RunConfig::from_env(&common)?;
            let r = commands::decompose(&input, &cfg)?;
            eprintln!(
                "{:?} k={} realized={:.6e} optimal={:.6e} ({:.3}s, {} workers)",
                r.method, r.k, r.realized, r.optimal, r.wall_seconds, r.workers
            );
        }
        Command::BenchError { input, common } => {
            commands::bench_error(&input, &RunConfig::from_env(&common)?)?;
        }
        Command::Recognize { input, common } => {
            let cfg = RunConfig::from_env(&common)?;
            let report = commands::recognize(&input, &cfg)?;
            for m in &report.methods {
                let mean = m.folds.iter().map(|f| f.mean).sum::<f64>() / m.folds.len() as f64;
                eprintln!("{:<12} mean rate {:.4}", m.method, mean);
            }
        }
        Command::CrossValidate { input, common } => {
            commands::cross_validate(&input, &RunConfig::from_env(&common)?)?;
        }
        Command::Info { input, common } => {
            commands::info(&input, &RunConfig::from_env(&common)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
