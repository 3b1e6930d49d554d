use std::process::ExitCode;

use clap::Parser;

use gunopt_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gunopt: {e}");
            e.exit_code()
        }
    }
}
