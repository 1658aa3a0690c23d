use std::process::ExitCode;

use clap::Parser;
use css_cli::Args;

fn main() -> ExitCode {
    let args = Args::parse();
    match css_cli::run(&args) {
        Ok(outcome) => {
            if !args.quiet {
                eprint!("{}", outcome.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("css-sim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
