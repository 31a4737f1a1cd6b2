use std::process::ExitCode;

use clap::Parser;
use stm::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("stm: error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
