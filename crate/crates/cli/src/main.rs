mod args;
mod commands;
mod output;
mod verify;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Anything that stops a command before it produces its report.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<kalman_cascade::Error> for Failure {
    fn from(e: kalman_cascade::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let outcome = match cli.command {
        Command::Precision(a) => commands::precision(a)?,
        Command::Rate(a) => commands::rate(a)?,
        Command::Montecarlo(a) => commands::montecarlo(a)?,
        Command::Riccati(a) => commands::riccati(a)?,
        Command::GaussianCheck(a) => commands::gaussian_check(a)?,
        Command::Verify(a) => verify::verify(a)?,
    };
    let bytes = output::render(&outcome.config, &outcome.table)?;
    output::emit(&bytes, outcome.config.output_path.as_deref().map(Path::new))?;
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own for malformed command lines
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
