use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use segq_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            let mut stdout = std::io::stdout().lock();
            for line in lines {
                // A closed pipe (e.g. `| head`) is not an error for us.
                if writeln!(stdout, "{line}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("segq {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
