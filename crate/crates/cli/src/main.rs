//! `ssa`: verification, simulation, trace export, energy reports and sweeps
//! for the stochastic spiking attention model.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.

mod commands;
mod config;
mod error;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{LoadedConfig, Synthetic};
use crate::error::Outcome;

#[derive(Debug, Parser)]
#[command(name = "ssa", version, about = "Stochastic spiking attention simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the invariant suite and report per-check statistics.
    Verify(Common),
    /// Run a simulation and write the decoded output and a summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        /// Also write the per-step attention spikes.
        #[arg(long)]
        save_spikes: bool,
    },
    /// Run the cycle-accurate model and write its trace as JSON lines.
    Trace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        /// Record every SAU counter each cycle.
        #[arg(long)]
        full_trace: bool,
    },
    /// Compare ANN, integer-spiking and stochastic attention energy.
    Energy(Common),
    /// Run a grid of (N, D_K, T, seed) cells in parallel.
    Sweep(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file; the builtin default is used when absent.
    #[arg(long, short, env = "SSA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "ssa-out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn load(&self) -> Result<(LoadedConfig, u64), error::CliError> {
        let cfg = LoadedConfig::load(self.config.as_deref())?;
        let seed = self.seed.unwrap_or(cfg.file.ssa.seed);
        Ok((cfg, seed))
    }
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// Overlap consecutive time steps in the SAU array.
    #[arg(long)]
    pub pipelined: bool,
    /// Drive Q/K/V with independent Bernoulli inputs instead of LIF layers.
    #[arg(long)]
    pub independent: bool,
    /// Generate inputs instead of reading matrix files.
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(common) => commands::verify::run(common),
        Command::Simulate {
            common,
            run,
            save_spikes,
        } => commands::simulate::run(common, run, *save_spikes),
        Command::Trace {
            common,
            run,
            full_trace,
        } => commands::trace::run(common, run, *full_trace),
        Command::Energy(common) => commands::energy::run(common),
        Command::Sweep(common) => commands::sweep::run(common),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
