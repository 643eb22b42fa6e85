//! `oddcf`: command-line front end. Exit codes: 0 success, 1 verification
//! or precision failure, 2 usage error.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use oddcf::CfError;

use crate::args::Cli;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Errors caused by the invocation rather than by the computation.
fn is_usage(e: &CfError) -> bool {
    matches!(
        e,
        CfError::Parse { .. }
            | CfError::OutOfRange { .. }
            | CfError::ZeroInput
            | CfError::EvenDigit(_)
            | CfError::InvalidDigitString(_)
            | CfError::PrecisionBudget { .. }
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let out = match commands::run(&cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_FAILURE });
        }
    };
    let written = match &cli.common.out {
        Some(path) => std::fs::write(path, &out.text),
        None => std::io::stdout().lock().write_all(out.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(EXIT_FAILURE);
    }
    match out.failure {
        Some(msg) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_FAILURE)
        }
        None => ExitCode::SUCCESS,
    }
}
