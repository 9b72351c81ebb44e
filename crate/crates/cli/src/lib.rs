//! Command-line front end: field synthesis, state evolution, verification
//! against numerical integration and parameter scans.
//!
//! Exit status: 0 on success, 1 when a requested verification fails or a
//! numerical error occurs, 2 for usage and configuration errors.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod output;

use std::ffi::OsString;

use clap::Parser;

use crate::args::Cli;
use crate::commands::{execute, Outcome};

/// Parses `argv`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code().try_into().unwrap_or(2);
        }
    };
    match execute(&cli.command) {
        Ok(Outcome::Done) | Ok(Outcome::Verified { pass: true }) => 0,
        Ok(Outcome::Verified { pass: false }) => {
            eprintln!("verification failed");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
