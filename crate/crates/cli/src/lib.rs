//! Config-driven pipeline: data generation, training, sweeps, inversion
//! and reporting.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use commands::SweepKind;
pub use config::{derive_seed, resolve, PipelineConfig, StageSeeds, ENV_PREFIX};
pub use manifest::{RunManifest, TOOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing artifacts in {}: {}", dir.display(), missing.join(", "))]
    MissingArtifacts { dir: PathBuf, missing: Vec<String> },
    #[error("N_obs = {n_obs}: divergence rate {rate:.3} exceeds {limit}")]
    Divergence { n_obs: usize, rate: f64, limit: f64 },
    #[error(transparent)]
    Dataset(#[from] sodbayes::sampling::DatasetError),
    #[error(transparent)]
    Surrogate(#[from] sodbayes::aerom::AeromError),
    #[error(transparent)]
    Bayes(#[from] sodbayes::bayes::BayesError),
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Parser)]
#[command(name = "sodbayes", version, about = "Shock-tube surrogate training and Bayesian inversion")]
pub struct Cli {
    /// JSON config file or run manifest; missing keys take full-scale defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 makes every output bit-reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample parameters and run the high-fidelity solver.
    GenData {
        #[arg(long)]
        n_sim: Option<usize>,
    },
    /// Train the autoencoder and the latent forward operator.
    Train {
        #[arg(long)]
        latent_dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Latent-dimension or data-budget study.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
    },
    /// Posterior sampling from synthetic observations.
    Infer {
        /// Sensor counts; defaults to the configured list.
        #[arg(long = "n-obs")]
        n_obs: Vec<usize>,
    },
    /// Aggregate inversion metrics across sensor counts.
    Report,
}

impl Cli {
    /// Flag values as a config patch.
    pub fn overrides(&self) -> Value {
        let mut v = json!({});
        let mut set = |path: &[&str], value: Value| {
            let patch = path.iter().rev().fold(value, |acc, k| json!({ *k: acc }));
            config::merge(&mut v, patch);
        };
        if let Some(s) = self.seed {
            set(&["seed"], json!(s));
        }
        if let Some(t) = self.threads {
            set(&["threads"], json!(t));
        }
        if let Some(o) = &self.out {
            set(&["out"], json!(o));
        }
        match &self.command {
            Command::GenData { n_sim: Some(n) } => set(&["sampling", "n_sim"], json!(n)),
            Command::Train { latent_dim, epochs } => {
                if let Some(n) = latent_dim {
                    set(&["training", "latent_dim"], json!(n));
                }
                if let Some(e) = epochs {
                    set(&["training", "epochs"], json!(e));
                }
            }
            _ => {}
        }
        v
    }
}

/// Resolves the configuration and runs one command.
pub fn run<I>(cli: &Cli, env: I) -> Result<PipelineConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let config = resolve(cli.config.as_deref(), env, cli.overrides())?;
    if let Some(n) = config.threads {
        // a pool that already exists (e.g. a second call in one process) is kept
        if rayon::current_num_threads() != n {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Threads(e.to_string()))?;
        }
    }
    match &cli.command {
        Command::GenData { .. } => {
            commands::gen_data(&config)?;
        }
        Command::Train { .. } => {
            commands::train(&config)?;
        }
        Command::Sweep { kind } => {
            commands::sweep(&config, *kind)?;
        }
        Command::Infer { n_obs } => {
            let ns = if n_obs.is_empty() { config.inference.n_obs.clone() } else { n_obs.clone() };
            commands::infer(&config, &ns)?;
        }
        Command::Report => {
            let r = commands::report(&config)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        }
    }
    Ok(config)
}
