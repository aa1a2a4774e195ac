use std::process::ExitCode;

use clap::Parser;
use scint_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("scint: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
