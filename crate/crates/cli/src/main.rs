//! `dplbfgs`: run the solvers on LIBSVM data over a simulated cluster and
//! write per-iteration CSV traces.

mod args;
mod format;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage = 1,
    Data = 2,
    Solver = 3,
}

/// A failure with the status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { exit: Exit::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure { exit: Exit::Data, message: message.into() }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        Failure { exit: Exit::Solver, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(Exit::Usage as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dplbfgs: {}", f.message);
            ExitCode::from(f.exit as u8)
        }
    }
}
