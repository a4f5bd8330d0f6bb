//! `muxrisk` command-line pipeline: synth → score / series → cluster / compare.
//!
//! Failures print exactly one line to stderr,
//! `error code=<n> kind=<kind> message="..."`, and exit with 2 (validation),
//! 3 (convergence) or 4 (I/O).

mod cli;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(args) => commands::cmd_synth(&cli.out, args),
        Command::Score(args) => commands::cmd_score(&cli.out, args),
        Command::Series(args) => commands::cmd_series(&cli.out, args),
        Command::Cluster(args) => commands::cmd_cluster(&cli.out, args),
        Command::Compare(args) => commands::cmd_compare(&cli.out, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let err = CliError::Validation("no subcommand given; see --help".into());
            eprintln!("{}", err.machine_line());
            return ExitCode::from(2);
        }
        Err(e) => {
            let rendered = e.to_string();
            let msg = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let msg = msg.strip_prefix("error: ").unwrap_or(&msg).to_string();
            eprintln!("{}", CliError::Validation(msg).machine_line());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
