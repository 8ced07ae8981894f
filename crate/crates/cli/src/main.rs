use clap::{Parser, Subcommand};
use std::process::ExitCode;

mod args;
mod commands;
mod error;
mod plot;

use args::{Configurable, EchoArgs, OracleArgs, RobustnessArgs, TransferArgs};
use error::{usage, CliError};

/// Ferromagnetic spin-chain dynamics from antiferromagnetic pulses.
#[derive(Parser)]
#[command(name = "echochain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Echo fidelity curve, optionally with the mean-field baseline.
    Echo(EchoArgs),
    /// Singlet transfer fidelity curve along the engineered chain.
    Transfer(TransferArgs),
    /// Gate-noise sweeps and log-log slope fits.
    Robustness(RobustnessArgs),
    /// Run the self-check suite and print a JSON report.
    OracleCheck(OracleArgs),
}

/// Caps the global pool at `ECHOCHAIN_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ECHOCHAIN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| usage(format!("ECHOCHAIN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))
}

fn run(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::Echo(a) => commands::echo(a.resolve()?),
        Command::Transfer(a) => commands::transfer(a.resolve()?),
        Command::Robustness(a) => commands::robustness(a.resolve()?),
        Command::OracleCheck(a) => commands::oracle_check(a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
