mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Fit(a) => commands::run_fit(a),
        Command::Curves(a) => commands::run_curves(a),
        Command::Simulate(a) => commands::run_simulate(a),
        Command::Gof(a) => commands::run_gof(a),
    };
    let code = outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.code
    });
    ExitCode::from(code as u8)
}
