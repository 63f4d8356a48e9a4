mod args;
mod commands;
mod io;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match &cli.command {
        Command::Fit(c) => commands::fit(c),
        Command::Density(c) => commands::density(c),
        Command::Sample(c) => commands::sample(c),
        Command::Cv(c) => commands::cv(c),
        Command::Classify(c) => commands::classify(c),
        Command::Bench(c) => commands::bench(c),
        Command::Coverage(c) => commands::coverage(c),
        Command::KSweep(c) => commands::k_sweep_cmd(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
