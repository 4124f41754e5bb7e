use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match m3fed_cli::run(m3fed_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
