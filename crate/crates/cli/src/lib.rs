//! Command surface of the board emulator.

pub mod budget;
pub mod cli;
pub mod commands;
pub mod error;
pub mod session;

use std::io::Write;

use cli::{Cli, Command};
use error::CliResult;

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, out).map(drop),
        Command::Serve(a) => commands::serve(a, out),
        Command::Record(a) => commands::record(a, out),
        Command::Analyze(a) => commands::analyze(a, out).map(drop),
        Command::Impedance(a) => commands::impedance(a, out).map(drop),
        Command::Budget(a) => commands::budget(a, out).map(drop),
        Command::Export(a) => commands::export(a, out).map(drop),
    }
}
