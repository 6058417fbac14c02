//! `adis`: source separation, dimensionality estimation and benchmarks.

mod bench;
mod config;
mod decompose;
mod gen;
mod latdim;
mod output;

use std::process::ExitCode;

use adis_core::CoreError;
use clap::{Parser, Subcommand};

/// Exit status for bad input or configuration.
const EXIT_INPUT: u8 = 2;
/// Exit status when a solver trace did not converge.
const EXIT_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "adis",
    version,
    about = "Projection-pursuit source separation and its benchmarks"
)]
struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, env = "ADIS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate sources, mixing and diagnostics from an observation matrix.
    Decompose(decompose::Args),
    /// Estimate the latent dimension of an observation matrix.
    Latdim(latdim::Args),
    /// Monte-Carlo separation, dimensionality grid and solver benchmarks.
    #[command(subcommand)]
    Bench(bench::BenchCommand),
    /// Write synthetic fixtures.
    #[command(subcommand)]
    Gen(gen::GenCommand),
}

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            anyhow::bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    match cli.command {
        Command::Decompose(args) => decompose::run(args),
        Command::Latdim(args) => latdim::run(args),
        Command::Bench(cmd) => bench::run(cmd),
        Command::Gen(cmd) => gen::run(cmd),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let failed = err
        .chain()
        .filter_map(|cause| cause.downcast_ref::<CoreError>())
        .any(|e| matches!(e.root(), CoreError::ComponentFailed { .. }));
    if failed {
        EXIT_CONVERGENCE
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(EXIT_CONVERGENCE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
