//! `score-lab verify-bounds|counterexample|manifold|sample|converge --config <file> [--key value ...]`
//!
//! Exit status: 0 success, 1 assertion-style failures (bound violations or
//! failed runs), 2 configuration errors. Files written by a run rejected for
//! its configuration are removed.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::config::{parse, Common, ConfigError};
use crate::output::Outputs;

#[derive(Parser)]
#[command(name = "score-lab", version, about = "Score-field bound sweeps, counter-examples and sampler scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker cap; defaults to SCORE_LAB_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Dotted overrides applied after the file, e.g. `--target.params.sigma2 4`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a bound over a (t̄, x) grid and report violations.
    VerifyBounds(RunArgs),
    /// Block ratios and the chain lower bound.
    Counterexample(RunArgs),
    /// t‖D²q̄‖ and t²(-Δq̄ + n/t) along a t ladder.
    Manifold(RunArgs),
    /// One backward run with terminal-sample metrics.
    Sample(RunArgs),
    /// Backward runs over several step counts with a rate fit.
    Converge(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::VerifyBounds(a) => ("verify-bounds", a),
            Command::Counterexample(a) => ("counterexample", a),
            Command::Manifold(a) => ("manifold", a),
            Command::Sample(a) => ("sample", a),
            Command::Converge(a) => ("converge", a),
        }
    }
}

fn threads(args: &RunArgs) -> anyhow::Result<Option<usize>> {
    if let Some(n) = args.threads {
        return Ok(Some(n));
    }
    match std::env::var("SCORE_LAB_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config::config_err(format!("SCORE_LAB_THREADS must be a positive integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn run(name: &str, args: &RunArgs) -> anyhow::Result<bool> {
    if let Some(n) = threads(args)? {
        if n == 0 {
            return Err(config::config_err("thread count must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let value: Value = config::load(args.config.as_deref(), &args.overrides)?;
    let common: Common = parse(&value)?;
    let mut out = Outputs::open(&common.output)?;
    let result = match name {
        "verify-bounds" => commands::verify_bounds(&value, &common, &mut out),
        "counterexample" => commands::counterexample(&value, &common, &mut out),
        "manifold" => commands::manifold(&value, &common, &mut out),
        "sample" => commands::sample(&value, &common, &mut out),
        _ => commands::converge(&value, &common, &mut out),
    };
    match result {
        Ok(outcome) => {
            out.write_meta(name, &outcome.checks, &value)?;
            for p in out.written() {
                eprintln!("wrote {}", p.display());
            }
            Ok(!outcome.failed)
        }
        Err(e) => {
            if e.downcast_ref::<ConfigError>().is_some() {
                out.discard();
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.parts();
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("{name}: failures found, see the report");
            ExitCode::from(1)
        }
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
