//! `coupled-stability`: simulations, spectra, decay certificates and
//! verification suites for the catalog coupled systems.
//!
//! Exit status: 0 on success, 1 when a verification or certificate fails
//! (or a numerical error occurs), 2 on configuration errors. Errors are
//! reported as JSON on stderr.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::RunArgs;

#[derive(Debug, Parser)]
#[command(name = "coupled-stability", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    args: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the system catalog as JSON
    ListSystems,
    /// Evolve a state; writes trajectory.csv, energy.csv, simulate.json
    Simulate,
    /// Dense spectrum of the coupled generator; writes eigenvalues.csv, spectrum.json
    Spectrum,
    /// Composite exponential-decay certificate on [0, t_end]; writes certificate.json
    Decay,
    /// W and V over the horizon ladder plus saturated K, N; writes admissibility.json
    Admissibility,
    /// Resolvent identity, vop vs direct, semigroup law, triangular invariance; writes verify.json
    Verify,
    /// Repeat `decay` over the sweep_n resolutions; writes sweep.csv, sweep.json
    Sweep,
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Command::ListSystems = cli.command {
        return commands::list();
    }
    let c = cli.args.resolve().map_err(|e| CliError::Config(e.0))?;
    match cli.command {
        Command::ListSystems => unreachable!(),
        Command::Simulate => commands::simulate(&c),
        Command::Spectrum => commands::spectrum(&c),
        Command::Decay => commands::decay(&c),
        Command::Admissibility => commands::admissibility(&c),
        Command::Verify => commands::verify(&c),
        Command::Sweep => commands::sweep(&c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = CliError::Config(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
