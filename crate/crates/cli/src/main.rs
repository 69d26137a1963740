use std::process::ExitCode;

use clap::Parser;
use smfc_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match smfc_cli::run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} step(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
