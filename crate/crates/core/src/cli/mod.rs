//! The `fimax` command line.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures (singular information, integrator breakdown, line search).

pub mod config;
pub mod workflow;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use config::Config;
use workflow::Experiment;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fimax", version, about = "Fisher-information trajectory optimization")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `montecarlo.trials`.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Simulate the configured initial control.
    Simulate,
    /// Fisher information and Cramer-Rao bound of the initial control.
    Crb,
    /// Optimize the trajectory for information.
    Optimize,
    /// Estimate parameters from measurements.
    Estimate,
    /// Monte-Carlo estimation study on the initial control.
    Montecarlo,
    /// Optimize, then compare initial and optimized trajectories.
    Report,
}

/// Exit code for an error: configuration problems vs numerical ones.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Parse(_) | Error::Io(_) | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(args: &Args) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(n) = args.trials {
        cfg.montecarlo.trials = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("FIMAX_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("FIMAX_THREADS must be a positive integer, got {v:?}")))?;
    // A second initialization (tests calling `run` twice) is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn dispatch(cmd: Command, exp: &Experiment, out: &Path) -> Result<()> {
    let progress = |r: &crate::trajopt::IterationRecord| {
        eprintln!(
            "iter {:>3}  J {:.6e}  lambda_min {:.4e}  DJ.zeta {:.3e}  gamma {}",
            r.iter, r.j, r.lambda_min, r.dj_zeta, r.gamma
        )
    };
    match cmd {
        Command::Simulate => print_json(&workflow::run_simulate(exp, out)?),
        Command::Crb => print_json(&workflow::run_crb(exp, out)?),
        Command::Optimize => print_json(&workflow::run_optimize(exp, out, progress)?),
        Command::Estimate => print_json(&workflow::run_estimate(exp, out)?),
        Command::Montecarlo => print_json(&workflow::run_montecarlo(exp, out)?),
        Command::Report => {
            let r = workflow::run_report(exp, out, progress)?;
            print!("{}", r.to_markdown());
            Ok(())
        }
    }
}

/// Runs one command; returns the process exit code.
pub fn run(args: Args) -> i32 {
    let setup = (|| {
        init_threads()?;
        let cfg = resolve_config(&args)?;
        std::fs::create_dir_all(&cfg.out_dir)
            .map_err(|e| Error::InvalidConfig(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
        std::fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml()?)?;
        Experiment::new(cfg)
    })();
    let exp = match setup {
        Ok(e) => e,
        Err(e) => {
            eprintln!("fimax: {e}");
            return EXIT_CONFIG;
        }
    };
    match dispatch(args.command, &exp, &exp.config.out_dir) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fimax: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(Args::parse())
}
