use std::process::ExitCode;

use clap::Parser;
use qhash_cli::commands::execute;
use qhash_cli::config::Cli;
use qhash_cli::output::write_atomic;
use qhash_cli::{exit_code, EXIT_AUDIT};

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = cli.resolve()?;
    let outcome = execute(&cfg)?;
    match &cfg.output {
        Some(path) => write_atomic(path, &outcome.body)?,
        None => print!("{}", outcome.body),
    }
    if let (Some(path), Some(csv)) = (&cfg.csv, &outcome.csv) {
        write_atomic(path, csv)?;
    }
    if let Some(v) = outcome.violation {
        eprintln!("audit violation: {v}");
        return Ok(ExitCode::from(EXIT_AUDIT));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
