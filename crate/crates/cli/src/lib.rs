//! Command-line front end: loads a scenario file, runs one pipeline and writes
//! a JSON summary plus CSV tables into the output directory.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{load_config, Config};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "SEGQ_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "segq-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid config, unwritable output.
    #[error("input error: {0}")]
    Input(String),
    /// The model itself is infeasible or unstable.
    #[error("model error: {0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(_) => 1,
        }
    }
}

impl From<segq::Error> for CliError {
    fn from(e: segq::Error) -> Self {
        CliError::Model(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "segq", version, about = "Segmented-service queue analysis, optimization and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML). The built-in reference scenario is used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides SEGQ_OUT_DIR and the config's output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for the simulator and the particle swarm.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Departures per simulation run.
    #[arg(long, global = true, value_name = "N")]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stationary distributions, throughput and mean delay.
    Analyze,
    /// Inter-departure model and its Laplace transform.
    Depart,
    /// Channel access wait under cyclic polling.
    Channel,
    /// Minimum-power thresholds by brute force and particle swarm.
    Optimize,
    /// Event simulation of the queue and the polled channel.
    Simulate,
    /// Analytic quantities side by side with simulation.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Depart => "depart",
            Command::Channel => "channel",
            Command::Optimize => "optimize",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
        }
    }
}

/// Resolves the config and output directory, applying flag overrides.
pub fn prepare(cli: &Cli) -> Result<(Config, PathBuf), CliError> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => Config::reference(),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
        config.pso.seed = seed;
    }
    if let Some(horizon) = cli.horizon {
        config.simulation.horizon = horizon;
        config.validate()?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok((config, out))
}

/// Runs the selected subcommand and returns the lines to print.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let (config, out) = prepare(cli)?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", out.display())))?;
    commands::run_subcommand(cli.command, &config, &out)
}
