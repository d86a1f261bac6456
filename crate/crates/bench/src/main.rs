//! `decme` benchmark harness: simulate data, compute l_max, race
//! accelerators, probe the EM rate matrix and run the convergence checks.
//!
//! Exit codes: 0 success, 1 I/O error, 2 usage error, 3 numerical failure,
//! 4 verification failure.

mod args;
mod commands;
mod config;
mod plot;
mod problem;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
    Numerical(anyhow::Error),
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "usage: {e:#}"),
            Failure::Io(e) => write!(f, "{e:#}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e:#}"),
            Failure::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

/// Sorts a library error into bad input, I/O trouble or a numerical failure.
pub fn core_failure(e: decme::Error) -> Failure {
    use decme::Error as E;
    match e {
        E::Io(_) | E::Csv(_) => Failure::Io(e.into()),
        E::Parse(_)
        | E::InvalidSettings(_)
        | E::InvalidConstraints(_)
        | E::DimensionMismatch { .. }
        | E::InfeasibleStart
        | E::MissingMlStep(_)
        | E::NotTwoDimensional(_) => Failure::Usage(e.into()),
        _ => Failure::Numerical(e.into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Lmax(a) => commands::lmax(a),
        Command::Race(a) => commands::race_cmd(a),
        Command::Spectral(a) => commands::spectral_cmd(a),
        Command::Verify(a) => commands::verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("decme: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
