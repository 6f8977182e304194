use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = flagqm_cli::Cli::parse();
    ExitCode::from(flagqm_cli::run(&cli))
}
