//! Command-line driver: JSON configs in, CSV fields and JSON manifests out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use serde_json::json;

pub use error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Propagator,
    Evolve,
    Tonks,
    #[value(name = "oracle-n2")]
    OracleN2,
    Verify,
}

#[derive(Debug, Clone, clap::Parser)]
#[command(name = "deltagas", version, about = "Exact propagator of the delta Bose gas")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration; optional for `verify` only.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "deltagas-out")]
    pub out: PathBuf,
    /// Seed for the verification draws; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "DELTAGAS_THREADS")]
    pub threads: Option<usize>,
}

fn need(config: &Option<PathBuf>) -> Result<&Path> {
    config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))
}

/// Runs one command; verification results are printed to stdout.
pub fn execute(args: &Args) -> Result<()> {
    match args.command {
        Command::Propagator => {
            commands::propagator(&config::load(need(&args.config)?)?, &args.out)?;
        }
        Command::Evolve => {
            commands::evolve(&config::load(need(&args.config)?)?, &args.out)?;
        }
        Command::Tonks => {
            commands::tonks(&config::load(need(&args.config)?)?, &args.out)?;
        }
        Command::OracleN2 => {
            commands::oracle_n2(&config::load(need(&args.config)?)?, &args.out)?;
        }
        Command::Verify => {
            let cfg: config::VerifyConfig = match &args.config {
                Some(p) => config::load(p)?,
                None => Default::default(),
            };
            return run_verify(&cfg, args.seed, &args.out);
        }
    }
    Ok(())
}

pub fn run_verify(cfg: &config::VerifyConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let start = std::time::Instant::now();
    let outcomes = verify::run_suite(cfg, seed)?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    let mut staged = output::Staged::new();
    let mut report = serde_json::to_vec_pretty(&json!({ "checks": outcomes }))?;
    report.push(b'\n');
    staged.add("verify_report.json", report);
    let manifest = json!({
        "command": "verify",
        "version": commands::VERSION,
        "config": cfg,
        "seed": seed.or(cfg.seed).unwrap_or(verify::DEFAULT_SEED),
        "data": "verify_report.json",
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    staged.commit(out, manifest)?;
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} {}", o.id, o.name))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join("; ")))
    }
}
