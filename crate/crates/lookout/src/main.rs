use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match lookout::cli::run(lookout::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
