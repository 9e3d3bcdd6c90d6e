//! `clockrc`: exact checks, domination thresholds, percolation and heat-bath
//! runs for the dilute clock model.
//!
//! Exit status is 0 on success, 1 on invalid input or I/O errors, 2 on
//! malformed flags and 3 when a run completes but a check fails.

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use crate::commands::Outcome;
use crate::config::{Command, FileConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "clockrc", version, about)]
struct Cli {
    /// Worker threads; defaults to the number of logical cores
    #[arg(long, global = true, env = "CLOCKRC_THREADS")]
    threads: Option<usize>,
    /// TOML file of parameter defaults; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results to this file instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if threads == Some(0) {
        anyhow::bail!("threads must be at least 1");
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    init_threads(cli.threads.or(file.threads))?;
    let config = RunConfig::resolve(cli.command, file, cli.output)?;
    match config.output.clone() {
        Some(path) => {
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(f);
            let outcome = commands::run(config, &mut out)?;
            out.flush()?;
            Ok(outcome)
        }
        None => {
            let mut out = io::stdout().lock();
            commands::run(config, &mut out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
