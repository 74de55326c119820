use std::process::ExitCode;

use clap::Parser;
use slice_planner::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::init();
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
