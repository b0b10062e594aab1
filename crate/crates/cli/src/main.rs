//! `ews`: entropy-based early-warning detection from the command line.
//!
//! Exit codes: 0 success, 2 configuration or invariant violation, 3 input
//! that fails to parse.

mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ews_core::EwsError;
use thiserror::Error;

use settings::{Flags, Profile, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] EwsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(EwsError::Parse { .. } | EwsError::Csv(_)) => 3,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ews",
    version,
    about = "Early warnings from shifts in conditional entropy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic series with a known change and run the detector on it
    Simulate(Flags),
    /// Run the detector on a CSV series
    Detect(Flags),
    /// Calibrate the alarm level on change-free series
    Calibrate(Flags),
    /// False-alarm rate, delay and miss rate over seeded replications
    Metrics(Flags),
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("EWS_THREADS") {
        let n: usize = raw.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "EWS_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Simulate(f) => commands::simulate(&Settings::resolve(&f, Profile::Simulation)?),
        Command::Detect(f) => commands::detect_cmd(&Settings::resolve(&f, Profile::Empirical)?),
        Command::Calibrate(f) => {
            let profile = if f.input.is_some() {
                Profile::Empirical
            } else {
                Profile::Simulation
            };
            commands::calibrate(&Settings::resolve(&f, profile)?)
        }
        Command::Metrics(f) => commands::metrics(&Settings::resolve(&f, Profile::Simulation)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
