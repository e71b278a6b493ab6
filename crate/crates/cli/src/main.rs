use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::Flags;
use error::CliError;

/// Macroscopic entanglement indices for spin-1/2 systems.
#[derive(Parser)]
#[command(name = "macroent", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical, M_z and optimized correlation values for one state.
    Index(Flags),
    /// Values over a range of sizes with a power-law fit (CSV or JSON).
    Sweep(Flags),
    /// Mermin correlation and its ratio to the local bound.
    Mermin(Flags),
    /// Largest eigenvalue of the macroscopic CHSH operator.
    Chsh(Flags),
    /// Sufficient-condition check for an ensemble, with A = M_z.
    Conditions(Flags),
    /// Single-site measurement converting a two-branch state into a cat state.
    Convert(Flags),
    /// Runs the brute-force cross-checks.
    Verify(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match cli.command {
        Command::Index(f) => ("index", f),
        Command::Sweep(f) => ("sweep", f),
        Command::Mermin(f) => ("mermin", f),
        Command::Chsh(f) => ("chsh", f),
        Command::Conditions(f) => ("conditions", f),
        Command::Convert(f) => ("convert", f),
        Command::Verify(f) => ("verify", f),
    };
    match execute(name, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(name: &str, flags: Flags) -> Result<(), CliError> {
    let cfg = config::resolve(name, flags)?;
    match cfg.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
            pool.install(|| commands::run(&cfg))
        }
        None => commands::run(&cfg),
    }
}
