//! `cbicl`: generate planted instances, solve them exactly or heuristically,
//! and score solutions against ground truth.
//!
//! Exit codes: 0 success, 1 bad input, 2 infeasible instance, 3 time limit.

mod commands;
mod config;
mod truth;

use std::process::ExitCode;

use clap::Parser;

use config::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
