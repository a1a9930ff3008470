use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use graspdec_cli::{configure_threads, execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| execute(cli.command));
    match result {
        Ok(outcome) => {
            if let Some(run) = &outcome.run {
                for note in &run.notes {
                    eprintln!("warning: {note}");
                }
            }
            print!("{}", outcome.stdout);
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
