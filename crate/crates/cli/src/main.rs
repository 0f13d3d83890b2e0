use std::process::ExitCode;

use clap::Parser;
use impact_harvest_cli::app::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
