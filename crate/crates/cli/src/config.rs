use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use sodbayes::aerom::{TrainingConfig, TRAIN_FRACTION};
use sodbayes::bayes::{NutsConfig, PriorSpec, DEFAULT_SIGMA, THETA_TRUE};
use sodbayes::euler1d::{Grid, SolverConfig};
use sodbayes::sampling::{ParameterRanges, ParameterVector};

use crate::CliError;

/// Prefix of environment variables that override config keys. Nested keys
/// are joined with a double underscore: `SODBAYES_TRAINING__EPOCHS=20`.
pub const ENV_PREFIX: &str = "SODBAYES_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_sim: usize,
    pub ranges: ParameterRanges,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub latent_dims: Vec<usize>,
    pub budgets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub theta_true: ParameterVector,
    pub sigma: f64,
    pub n_obs: Vec<usize>,
    pub prior: PriorSpec,
    pub nuts: NutsConfig,
    /// Largest tolerated fraction of divergent transitions.
    pub max_divergence_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stage seed is derived from it.
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub sampling: SamplingConfig,
    pub training: TrainingConfig,
    pub sweep: SweepConfig,
    pub inference: InferenceConfig,
}

/// Seeds of the individual stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub lhs: u64,
    pub training: u64,
    pub nuts: u64,
    pub noise: u64,
}

/// First eight bytes of `SHA-256(root_le || label)`.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

impl StageSeeds {
    pub fn from_root(root: u64) -> Self {
        Self {
            lhs: derive_seed(root, "lhs"),
            training: derive_seed(root, "training"),
            nuts: derive_seed(root, "nuts"),
            noise: derive_seed(root, "noise"),
        }
    }
}

impl PipelineConfig {
    /// Full-scale study: 500 simulations on 1000 cells.
    pub fn full() -> Self {
        Self {
            seed: 0,
            threads: None,
            out: PathBuf::from("runs/full"),
            grid: Grid::unit(1000).expect("valid grid"),
            solver: SolverConfig::default(),
            sampling: SamplingConfig { n_sim: 500, ranges: ParameterRanges::shock_tube(), train_fraction: TRAIN_FRACTION },
            training: TrainingConfig::default(),
            sweep: SweepConfig {
                latent_dims: vec![4, 8, 16, 32, 64],
                budgets: vec![20, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500],
            },
            inference: InferenceConfig {
                theta_true: THETA_TRUE,
                sigma: DEFAULT_SIGMA,
                n_obs: vec![5, 20, 100],
                prior: PriorSpec::default(),
                nuts: NutsConfig::default(),
                max_divergence_rate: 0.1,
            },
        }
    }

    /// Laptop-sized profile: 100 simulations on 256 cells, short chains.
    pub fn desk() -> Self {
        let mut c = Self::full();
        c.out = PathBuf::from("runs/desk");
        c.grid = Grid::unit(256).expect("valid grid");
        c.sampling.n_sim = 100;
        c.training.epochs = 150;
        c.sweep.budgets = vec![20, 50, 100];
        c.inference.nuts = NutsConfig { chains: 2, warmup: 250, draws: 500, ..NutsConfig::default() };
        c
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::from_root(self.seed)
    }

    /// Writes the derived stage seeds into the sub-configs that carry one.
    pub fn apply_seeds(&mut self) {
        let s = self.seeds();
        self.training.seed = s.training;
        self.inference.nuts.seed = s.nuts;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        Grid::new(self.grid.nx, self.grid.x_min, self.grid.x_max).map_err(|e| CliError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
        ParameterRanges::new(self.sampling.ranges.bounds).map_err(|e| CliError::Config(e.to_string()))?;
        if self.sampling.n_sim < 2 {
            return bad(format!("sampling.n_sim must be at least 2, got {}", self.sampling.n_sim));
        }
        if !(self.sampling.train_fraction > 0.0 && self.sampling.train_fraction < 1.0) {
            return bad(format!("sampling.train_fraction must lie in (0, 1), got {}", self.sampling.train_fraction));
        }
        self.training.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.sweep.latent_dims.contains(&0) || self.sweep.budgets.iter().any(|&b| b < 2) {
            return bad("sweep latent dims must be positive and budgets at least 2".into());
        }
        let inf = &self.inference;
        PriorSpec::new(inf.prior.bounds).map_err(|e| CliError::Config(e.to_string()))?;
        inf.nuts.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !inf.prior.contains(&inf.theta_true) {
            return bad(format!("inference.theta_true {:?} lies outside the prior", inf.theta_true));
        }
        if !(inf.sigma > 0.0 && inf.sigma.is_finite()) {
            return bad(format!("inference.sigma must be positive, got {}", inf.sigma));
        }
        if inf.n_obs.is_empty() || inf.n_obs.iter().any(|&n| n < 2) {
            return bad("inference.n_obs needs entries of at least 2".into());
        }
        if !(0.0..=1.0).contains(&inf.max_divergence_rate) {
            return bad(format!("inference.max_divergence_rate must lie in [0, 1], got {}", inf.max_divergence_rate));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `SODBAYES_A__B=value` pairs as `{"a": {"b": value}}` patches.
/// Values parse as JSON when possible and as strings otherwise.
pub fn apply_env_overrides<I>(value: &mut Value, vars: I) -> Result<Vec<String>, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut applied = Vec::new();
    for (key, raw) in vars {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
        let path: Vec<String> = rest.split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Config(format!("malformed override variable {key}")));
        }
        let leaf = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let patch = path.iter().rev().fold(leaf, |acc, k| {
            let mut m = serde_json::Map::new();
            m.insert(k.clone(), acc);
            Value::Object(m)
        });
        merge(value, patch);
        applied.push(key);
    }
    applied.sort();
    Ok(applied)
}

/// Reads a config file. A run manifest is accepted too, in which case its
/// resolved configuration is used.
pub fn read_config_value(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if v.get("tool_version").is_some() {
        if let Some(c) = v.get_mut("config") {
            return Ok(c.take());
        }
    }
    Ok(v)
}

/// Layers defaults, file, environment and explicit overrides, then validates.
pub fn resolve<I>(file: Option<&Path>, env: I, overrides: Value) -> Result<PipelineConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut v = serde_json::to_value(PipelineConfig::full()).expect("config serializes");
    if let Some(path) = file {
        merge(&mut v, read_config_value(path)?);
    }
    apply_env_overrides(&mut v, env)?;
    merge(&mut v, overrides);
    let mut c: PipelineConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    c.apply_seeds();
    c.validate()?;
    Ok(c)
}
