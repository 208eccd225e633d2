use std::process::ExitCode;

use clap::Parser;
use panelgls::cli::{run_cli, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match args.into_config().and_then(|c| run_cli(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("panelgls: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
