//! Bayesian recovery of the initial states from sparse noisy observations.

mod diagnostics;
mod likelihood;
mod nuts;
mod observe;
mod prior;
mod summary;

pub use diagnostics::{effective_sample_size, split_rhat};
pub use likelihood::{
    gaussian_log_likelihood, log_normalizer, DiagonalGaussian, LogDensity, PriorOnly, SurrogateLikelihood, SurrogatePosterior,
};
pub use nuts::{run_chain, run_chains, ChainRun, NutsConfig, MAX_DELTA_H};
pub use observe::{
    make_observation_locations, observe, synthesize_observations, ObservationConfig, ObservationSet, DEFAULT_SIGMA, OBS_WINDOW,
};
pub use prior::{from_unconstrained, log_prior, to_unconstrained, transform_derivative, PriorSpec};
pub use summary::{percentile_sorted, posterior_summary, summarize_field, FieldSummary, PosteriorSummary};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aerom::{AeRomBundle, AeromError};
use crate::euler1d::{SolverConfig, SolverError};
use crate::nn::NnError;
use crate::sampling::ParameterVector;

#[derive(Debug, thiserror::Error)]
pub enum BayesError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("posterior statistics need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Surrogate(#[from] AeromError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Divergence rate above which a run is flagged.
pub const DIVERGENCE_WARNING_RATE: f64 = 0.1;

/// Classic Sod state used as ground truth in the experiments.
pub const THETA_TRUE: ParameterVector = ParameterVector::sod();

/// Convergence and sampler statistics of a posterior run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub parameters: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    pub divergences: usize,
    pub divergence_rate: f64,
    pub divergence_warning: bool,
    pub accept_stat: Vec<f64>,
    pub step_size: Vec<f64>,
    pub mean_tree_depth: Vec<f64>,
}

/// Constrained posterior draws, chain-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub draws: Vec<ParameterVector>,
    pub diagnostics: Diagnostics,
}

impl PosteriorSamples {
    /// Draws of chain `c`.
    pub fn chain(&self, c: usize) -> &[ParameterVector] {
        &self.draws[c * self.draws_per_chain..(c + 1) * self.draws_per_chain]
    }

    /// Per-chain traces of component `k`.
    pub fn component(&self, k: usize) -> Vec<Vec<f64>> {
        (0..self.chains).map(|c| self.chain(c).iter().map(|d| d.to_array()[k]).collect()).collect()
    }

    /// CSV with columns `chain,step,rho_L,p_L,rho_R,p_R`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("chain,step,{}\n", ParameterVector::NAMES.join(","));
        for c in 0..self.chains {
            for (i, d) in self.chain(c).iter().enumerate() {
                let a = d.to_array();
                s.push_str(&format!("{c},{i},{:e},{:e},{:e},{:e}\n", a[0], a[1], a[2], a[3]));
            }
        }
        s
    }
}

/// Diagnostics over raw chain output of any dimension.
pub fn chain_diagnostics(runs: &[ChainRun], names: &[String]) -> Diagnostics {
    let dim = names.len();
    let traces = |k: usize| -> Vec<Vec<f64>> { runs.iter().map(|r| r.draws.iter().map(|d| d[k]).collect()).collect() };
    let total: usize = runs.iter().map(|r| r.draws.len()).sum();
    let divergences: usize = runs.iter().map(ChainRun::divergences).sum();
    let rate = divergences as f64 / total.max(1) as f64;
    Diagnostics {
        parameters: names.to_vec(),
        rhat: (0..dim).map(|k| split_rhat(&traces(k))).collect(),
        ess: (0..dim).map(|k| effective_sample_size(&traces(k))).collect(),
        divergences,
        divergence_rate: rate,
        divergence_warning: rate > DIVERGENCE_WARNING_RATE,
        accept_stat: runs.iter().map(ChainRun::mean_accept).collect(),
        step_size: runs.iter().map(|r| r.step_size).collect(),
        mean_tree_depth: runs
            .iter()
            .map(|r| r.tree_depth.iter().sum::<usize>() as f64 / r.tree_depth.len().max(1) as f64)
            .collect(),
    }
}

/// Runs NUTS on a target with 4 coordinates in the unconstrained space of
/// `prior`, starting from independent prior draws, and maps the draws back.
pub fn sample_unconstrained<D: LogDensity>(target: &D, prior: &PriorSpec, config: &NutsConfig) -> Result<PosteriorSamples, BayesError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x1a17_0000);
    let inits = (0..config.chains)
        .map(|_| to_unconstrained(&prior.sample(&mut rng), prior).map(|(eta, _)| eta.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let runs = run_chains(target, &inits, config)?;
    // diagnostics are computed on the constrained draws
    let constrained: Vec<ChainRun> = runs
        .into_iter()
        .map(|mut r| {
            for d in &mut r.draws {
                let eta: [f64; 4] = d.as_slice().try_into().expect("four coordinates");
                *d = from_unconstrained(&eta, prior).0.to_array().to_vec();
            }
            r
        })
        .collect();
    let names: Vec<String> = ParameterVector::NAMES.iter().map(|s| s.to_string()).collect();
    let diagnostics = chain_diagnostics(&constrained, &names);
    let draws = constrained
        .iter()
        .flat_map(|r| r.draws.iter().map(|d| ParameterVector::from_array([d[0], d[1], d[2], d[3]])))
        .collect();
    Ok(PosteriorSamples { chains: config.chains, draws_per_chain: config.draws, draws, diagnostics })
}

/// Posterior sampling of `theta` through the surrogate.
pub fn nuts_sample(obs: &ObservationSet, bundle: &AeRomBundle, prior: &PriorSpec, config: &NutsConfig) -> Result<PosteriorSamples, BayesError> {
    let target = SurrogatePosterior { likelihood: SurrogateLikelihood::new(bundle, obs)?, prior: *prior };
    sample_unconstrained(&target, prior, config)
}

/// Settings shared by every inversion in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionSettings {
    pub theta_true: ParameterVector,
    pub sigma: f64,
    pub prior: PriorSpec,
    pub nuts: NutsConfig,
    pub solver: SolverConfig,
    pub noise_seed: u64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            theta_true: THETA_TRUE,
            sigma: DEFAULT_SIGMA,
            prior: PriorSpec::default(),
            nuts: NutsConfig::default(),
            solver: SolverConfig::default(),
            noise_seed: 0,
        }
    }
}

/// Noise seed of the `n_obs` run: an independent stream per sensor count.
pub fn noise_seed_for(base: u64, n_obs: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(n_obs as u64);
    rand::Rng::random(&mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionRun {
    pub observations: ObservationSet,
    pub samples: PosteriorSamples,
    pub summary: PosteriorSummary,
}

/// One row of the observation-density study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionMetrics {
    pub n_obs: usize,
    pub rmse_rho: f64,
    pub rmse_p: f64,
    pub mean_std_rho: f64,
    pub mean_std_p: f64,
    pub max_rhat: f64,
    pub divergences: usize,
}

impl InversionRun {
    pub fn metrics(&self) -> InversionMetrics {
        InversionMetrics {
            n_obs: self.observations.config.n_obs,
            rmse_rho: self.summary.rho.rmse,
            rmse_p: self.summary.p.rmse,
            mean_std_rho: self.summary.rho.mean_std,
            mean_std_p: self.summary.p.mean_std,
            max_rhat: self.samples.diagnostics.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            divergences: self.samples.diagnostics.divergences,
        }
    }
}

/// Synthesizes `n_obs` high-fidelity observations and samples the posterior.
pub fn run_inversion(n_obs: usize, bundle: &AeRomBundle, settings: &InversionSettings) -> Result<InversionRun, BayesError> {
    let config = ObservationConfig::new(n_obs, settings.sigma, &bundle.grid)?;
    let observations = synthesize_observations(
        &settings.theta_true,
        &config,
        &bundle.grid,
        &settings.solver,
        noise_seed_for(settings.noise_seed, n_obs),
    )?;
    let samples = nuts_sample(&observations, bundle, &settings.prior, &settings.nuts)?;
    let summary = posterior_summary(&samples.draws, &settings.theta_true, &bundle.grid)?;
    Ok(InversionRun { observations, samples, summary })
}

/// Inversions for each sensor count in `n_obs`.
pub fn observation_sweep(n_obs: &[usize], bundle: &AeRomBundle, settings: &InversionSettings) -> Result<Vec<InversionRun>, BayesError> {
    if n_obs.is_empty() {
        return Err(BayesError::Config("observation sweep needs at least one sensor count".into()));
    }
    n_obs.iter().map(|&n| run_inversion(n, bundle, settings)).collect()
}

/// CSV with one row per sensor count.
pub fn metrics_csv(rows: &[InversionMetrics]) -> String {
    let mut s = String::from("n_obs,rmse_rho,rmse_p,mean_std_rho,mean_std_p,max_rhat,divergences\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{}\n",
            r.n_obs, r.rmse_rho, r.rmse_p, r.mean_std_rho, r.mean_std_p, r.max_rhat, r.divergences
        ));
    }
    s
}
