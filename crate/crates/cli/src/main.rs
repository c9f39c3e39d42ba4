mod args;
mod commands;
mod sweep;

use std::fs::File;
use std::io::BufReader;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use qmetric_core::{Error, ErrorClass, Result};

use args::{Cli, Command};
use commands::Echo;
use sweep::SweepConfig;

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Estimator => 2,
        ErrorClass::NumericCap => 3,
    }
}

fn rerun(path: &std::path::Path) -> Result<()> {
    let value: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let config = value
        .get("config")
        .ok_or_else(|| Error::Format(format!("{} has no 'config' field", path.display())))?;
    let echo: Echo = serde_json::from_value(config.clone())?;
    echo.run()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => Echo::Gen(a).run(),
        Command::Dist(a) => Echo::Dist(a).run(),
        Command::Estimate(a) => Echo::Estimate(a).run(),
        Command::Sweep(a) => Echo::Sweep(SweepConfig::resolve(&a)?).run(),
        Command::Bounds(a) => Echo::Bounds(a).run(),
        Command::Rerun(a) => rerun(&a.from),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::CoverageIncomplete { missing, first_missing, .. } = &e {
                eprintln!("missing labels: {missing} (first: {first_missing:?})");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
