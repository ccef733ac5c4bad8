use std::f64::consts::PI;

use super::observe::ObservationSet;
use super::prior::{from_unconstrained, log_prior, transform_derivative, PriorSpec};
use super::BayesError;
use crate::aerom::AeRomBundle;
use crate::nn::{Tape, Tensor};
use crate::sampling::ParameterVector;

/// Differentiable log density on an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Value and gradient at `q`.
    fn log_density_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>), BayesError>;
}

/// `-(N_y/2) log(2 pi sigma^2)`.
pub fn log_normalizer(n_y: usize, sigma: f64) -> f64 {
    -0.5 * n_y as f64 * (2.0 * PI * sigma * sigma).ln()
}

/// Full Gaussian log-likelihood of `y_obs` given model outputs `m`.
pub fn gaussian_log_likelihood(y_obs: &[f64], m: &[f64], sigma: f64) -> f64 {
    let ss: f64 = y_obs.iter().zip(m).map(|(y, m)| (y - m) * (y - m)).sum();
    -ss / (2.0 * sigma * sigma) + log_normalizer(y_obs.len(), sigma)
}

/// Surrogate likelihood `p(y_obs | theta)` through the trained bundle.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateLikelihood<'a> {
    pub bundle: &'a AeRomBundle,
    pub obs: &'a ObservationSet,
}

impl<'a> SurrogateLikelihood<'a> {
    pub fn new(bundle: &'a AeRomBundle, obs: &'a ObservationSet) -> Result<Self, BayesError> {
        let nx = bundle.grid.nx;
        if obs.y_obs.len() != obs.config.len() {
            return Err(BayesError::Config(format!("y_obs has {} entries, expected {}", obs.y_obs.len(), obs.config.len())));
        }
        if let Some(&c) = obs.config.cells.iter().find(|&&c| c >= nx) {
            return Err(BayesError::Config(format!("observation cell {c} outside the surrogate grid of {nx} cells")));
        }
        Ok(Self { bundle, obs })
    }

    /// Model observations `M(theta)`.
    pub fn model_observations(&self, theta: &ParameterVector) -> Result<Vec<f64>, BayesError> {
        let mut tape = Tape::new();
        let (_, y) = self.bundle.record_prediction(&mut tape, theta)?;
        let data = tape.value(y).data();
        Ok(self.obs.config.flat_indices(self.bundle.grid.nx).into_iter().map(|i| data[i]).collect())
    }

    pub fn log_likelihood(&self, theta: &ParameterVector) -> Result<f64, BayesError> {
        Ok(gaussian_log_likelihood(&self.obs.y_obs, &self.model_observations(theta)?, self.obs.config.sigma))
    }

    /// Log-likelihood and its gradient with respect to `theta`.
    pub fn log_likelihood_grad(&self, theta: &ParameterVector) -> Result<(f64, [f64; 4]), BayesError> {
        let nx = self.bundle.grid.nx;
        let sigma2 = self.obs.config.sigma * self.obs.config.sigma;
        let mut tape = Tape::new();
        let (th, y) = self.bundle.record_prediction(&mut tape, theta)?;
        let idx = self.obs.config.flat_indices(nx);
        let m: Vec<f64> = idx.iter().map(|&i| tape.value(y).data()[i]).collect();
        let value = gaussian_log_likelihood(&self.obs.y_obs, &m, self.obs.config.sigma);
        let mut seed = vec![0.0; 3 * nx];
        for ((&i, &mi), &yi) in idx.iter().zip(&m).zip(&self.obs.y_obs) {
            seed[i] += (yi - mi) / sigma2;
        }
        let grads = tape.backward_with_seed(y, Tensor::new(vec![1, 3, nx], seed)?)?;
        let g = grads.get(th);
        let mut out = [0.0; 4];
        out.copy_from_slice(g.data());
        Ok((value, out))
    }
}

/// Posterior of `theta` mapped to the unconstrained scaled-logit space,
/// including the log-Jacobian of the inverse transform.
#[derive(Debug, Clone, Copy)]
pub struct SurrogatePosterior<'a> {
    pub likelihood: SurrogateLikelihood<'a>,
    pub prior: PriorSpec,
}

impl LogDensity for SurrogatePosterior<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn log_density_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>), BayesError> {
        let eta: [f64; 4] = q.try_into().map_err(|_| BayesError::Config(format!("expected 4 coordinates, got {}", q.len())))?;
        let (theta, logj, dlogj) = from_unconstrained(&eta, &self.prior);
        let (ll, g) = self.likelihood.log_likelihood_grad(&theta)?;
        let dtheta = transform_derivative(&eta, &self.prior);
        let grad = (0..4).map(|k| g[k] * dtheta[k] + dlogj[k]).collect();
        Ok((ll + log_prior(&theta, &self.prior) + logj, grad))
    }
}

/// Prior alone in unconstrained space; its pushforward is uniform on the box.
#[derive(Debug, Clone, Copy)]
pub struct PriorOnly {
    pub prior: PriorSpec,
}

impl LogDensity for PriorOnly {
    fn dim(&self) -> usize {
        4
    }

    fn log_density_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>), BayesError> {
        let eta: [f64; 4] = q.try_into().map_err(|_| BayesError::Config(format!("expected 4 coordinates, got {}", q.len())))?;
        let (theta, logj, dlogj) = from_unconstrained(&eta, &self.prior);
        Ok((log_prior(&theta, &self.prior) + logj, dlogj.to_vec()))
    }
}

/// Independent Gaussian with the given means and standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }
}

impl LogDensity for DiagonalGaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>), BayesError> {
        if q.len() != self.dim() {
            return Err(BayesError::Config(format!("expected {} coordinates, got {}", self.dim(), q.len())));
        }
        let mut lp = 0.0;
        let mut g = vec![0.0; q.len()];
        for i in 0..q.len() {
            let r = (q[i] - self.mean[i]) / self.std[i];
            lp -= 0.5 * r * r;
            g[i] = -r / self.std[i];
        }
        Ok((lp, g))
    }
}
