//! Command-line driver for `qst-core`: simulation, reconstruction, solver
//! comparison and multistart verification, each writing a JSON document that
//! embeds the manifest of the run.

pub mod args;
pub mod commands;
pub mod error;
pub mod inputs;

use args::{Cli, Command};
use error::CliResult;

/// Runs one command and returns its exit code.
pub fn run(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::VerifyMinima(a) => commands::verify_minima(a),
        Command::Compare(a) => commands::compare(a),
    }
}
