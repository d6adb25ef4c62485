//! `ramem`: command-line front end for the Raman memory simulator.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use raman_memory::error::{Error, FitError};
use raman_memory::model::{Direction, SolverMode};

#[derive(Debug, Parser)]
#[command(name = "ramem", version, about = "Raman quantum-memory simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML). Defaults to the built-in experiment-like scenario.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to `runs/<subcommand>-<UTC timestamp>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub direction: Option<DirectionArg>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store, hold and retrieve one signal pulse.
    Run,
    /// Efficiency versus storage time, with a decay-model fit.
    SweepLifetime {
        /// Storage times in µs (comma separated); overrides `[sweep]`.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Bayesian optimization of the `[optimize]` dimensions.
    Optimize {
        /// Overrides `optimize.budget`.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Train of partial readouts of one stored spin wave.
    Splitter,
    /// Efficiency under successive doublings of both grids.
    Converge {
        #[arg(long, default_value_t = 1)]
        doublings: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::SweepLifetime { .. } => "sweep-lifetime",
            Self::Optimize { .. } => "optimize",
            Self::Splitter => "splitter",
            Self::Converge { .. } => "converge",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Backward => Direction::Backward,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Adiabatic,
    Full,
}

impl From<SolverArg> for SolverMode {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Adiabatic => SolverMode::Adiabatic,
            SolverArg::Full => SolverMode::Full,
        }
    }
}

/// 2 for anything the user can fix in the inputs, 3 for numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Validation(_) | Error::Parse(_) | Error::Space(_)) => 2,
        Some(Error::Fit(FitError::InvalidData(_))) => 2,
        Some(Error::Solver(_) | Error::Fit(_) | Error::Model(_) | Error::NoSuccessfulEvaluation { .. }) => 3,
        Some(Error::MissingRetrieval) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
