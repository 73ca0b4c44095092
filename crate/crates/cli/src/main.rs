use std::io::Write;

use clap::Parser;
use koopman_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(lines) => {
            let mut stdout = std::io::stdout().lock();
            for line in lines {
                if writeln!(stdout, "{line}").is_err() {
                    break;
                }
            }
        }
        Err(e) => {
            eprintln!("koopman: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

