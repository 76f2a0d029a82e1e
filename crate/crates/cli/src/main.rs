//! `hip`: configuration-driven experiments for the internal functional
//! `sigma |grad u|^p`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hip", version, about = "Forward, verification, reconstruction and stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (key = value, `#` comments).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the `out` key.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the potential and write u and F(sigma).
    Forward(Common),
    /// Run the invariant suite and print a pass/fail table.
    Verify(Common),
    /// Gauss-Newton reconstruction of the configured conductivity.
    Reconstruct(Common),
    /// Interpolation-estimate sweep for the linearization.
    SweepLinear(Common),
    /// Reconstruction error against data misfit over noise levels.
    SweepNonlinear(Common),
    /// Print the stability exponent plan.
    Plan(Common),
}

type Action = fn(&ExperimentConfig, &std::path::Path) -> Result<String, CliError>;

fn run(cli: Cli) -> Result<String, CliError> {
    let (common, action): (&Common, Action) = match &cli.command {
        Command::Forward(c) => (c, commands::forward),
        Command::Verify(c) => (c, commands::verify),
        Command::Reconstruct(c) => (c, commands::reconstruct),
        Command::SweepLinear(c) => (c, commands::sweep_linear),
        Command::SweepNonlinear(c) => (c, commands::sweep_nonlinear),
        Command::Plan(c) => (c, commands::plan),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.out.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| action(&cfg, &out))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hip: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
