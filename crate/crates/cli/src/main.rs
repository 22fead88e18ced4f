//! `tucker-gd`: generate data, fit models, run sweeps and inspect tensors.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical divergence, 4 I/O or
//! file-format error. Human-readable progress goes to standard error;
//! written paths and summary lines go to standard output.

mod commands;
mod opts;

use std::process::ExitCode;

use clap::Parser;

use opts::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Diverged(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Diverged(m) | CliError::Io(m) => m,
        }
    }
}

impl From<tucker_gd::Error> for CliError {
    fn from(e: tucker_gd::Error) -> Self {
        use tucker_gd::Error as E;
        match e {
            E::InvalidArgument(_) | E::DimensionMismatch(_) => CliError::Usage(e.to_string()),
            E::Numeric(_) => CliError::Diverged(e.to_string()),
            E::Format(_) | E::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { config, model, out } => commands::gen(config.as_deref(), model, out),
        Command::Fit { config, data, pgd, out } => commands::fit_cmd(config.as_deref(), data, pgd, out),
        Command::Sweep { config, spec, model, sweep, pgd, out } => {
            commands::sweep(config.as_deref(), spec.as_deref(), model, sweep, pgd, out)
        }
        Command::Inspect { path, top } => commands::inspect(&path, top),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
