use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use gapvine_cli::{error_exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout();
    let code = match run(cli, &mut out) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            error_exit_code(&e)
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
