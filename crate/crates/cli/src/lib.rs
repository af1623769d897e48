//! Command-line front end: `ingest`, `train`, `predict` and `scenario`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "countcast", version, about = "Probabilistic forecasts of regional daily counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a cumulative-count CSV into a daily panel.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the network and save it with its training history.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Predictive grid, credible bands and charts.
    Predict {
        #[command(flatten)]
        common: Common,
    },
    /// Compare forecasts under a perturbed history.
    Scenario {
        #[command(flatten)]
        common: Common,
        /// Scenario file (`region`, `feature`, `window_days`, `daily_multiplier`, ...).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path, &common.out)?,
        None => RunConfig::defaults(&common.out),
    };
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns its summary text.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Ingest { common } => commands::ingest(&load_config(&common)?),
        Command::Train { common } => commands::train_model(&load_config(&common)?),
        Command::Predict { common } => commands::predict(&load_config(&common)?),
        Command::Scenario { common, spec } => commands::scenario(&load_config(&common)?, spec.as_deref()),
    }
}
