mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
            eprintln!("error: kind={} msg=\"{msg}\"", e.kind());
            ExitCode::from(1)
        }
    }
}
