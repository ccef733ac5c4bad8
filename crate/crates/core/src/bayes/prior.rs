use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BayesError;
use crate::sampling::ParameterVector;

/// Independent uniform priors on `(rho_L, p_L, rho_R, p_R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub bounds: [(f64, f64); 4],
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { bounds: [(0.0, 2.0), (0.0, 2.0), (0.0, 0.2), (0.0, 0.2)] }
    }
}

impl PriorSpec {
    pub fn new(bounds: [(f64, f64); 4]) -> Result<Self, BayesError> {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(BayesError::Config(format!("prior bounds for {} must satisfy lo < hi", ParameterVector::NAMES[k])));
            }
        }
        Ok(Self { bounds })
    }

    /// Strict interior test.
    pub fn contains(&self, theta: &ParameterVector) -> bool {
        theta.to_array().iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v > lo && v < hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterVector {
        let mut a = [0.0; 4];
        for (v, &(lo, hi)) in a.iter_mut().zip(&self.bounds) {
            // open interval so the logit transform stays finite
            *v = loop {
                let x = rng.random_range(lo..hi);
                if x > lo {
                    break x;
                }
            };
        }
        ParameterVector::from_array(a)
    }
}

/// Log density of the prior; `-inf` outside the support.
pub fn log_prior(theta: &ParameterVector, prior: &PriorSpec) -> f64 {
    if prior.contains(theta) {
        -prior.bounds.iter().map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
    } else {
        f64::NEG_INFINITY
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `eta = logit((theta - lo) / (hi - lo))` and the log-Jacobian of the
/// inverse map at that point.
pub fn to_unconstrained(theta: &ParameterVector, prior: &PriorSpec) -> Result<([f64; 4], f64), BayesError> {
    if !prior.contains(theta) {
        return Err(BayesError::Config(format!("theta {theta:?} is not strictly inside the prior support")));
    }
    let mut eta = [0.0; 4];
    for (k, (&v, &(lo, hi))) in theta.to_array().iter().zip(&prior.bounds).enumerate() {
        let u = (v - lo) / (hi - lo);
        eta[k] = u.ln() - (1.0 - u).ln();
    }
    let (_, logj, _) = from_unconstrained(&eta, prior);
    Ok((eta, logj))
}

/// Inverse transform. Returns `theta`, `log |d theta / d eta|` and its
/// gradient with respect to `eta`.
pub fn from_unconstrained(eta: &[f64; 4], prior: &PriorSpec) -> (ParameterVector, f64, [f64; 4]) {
    let mut theta = [0.0; 4];
    let mut logj = 0.0;
    let mut grad = [0.0; 4];
    for k in 0..4 {
        let (lo, hi) = prior.bounds[k];
        let s = sigmoid(eta[k]);
        // keep theta strictly inside even when s rounds to 0 or 1
        theta[k] = (lo + (hi - lo) * s).clamp(lo + (hi - lo) * f64::EPSILON, hi - (hi - lo) * f64::EPSILON);
        // log s + log(1 - s) = -|eta| - 2 log(1 + exp(-|eta|))
        let a = eta[k].abs();
        logj += (hi - lo).ln() - a - 2.0 * (-a).exp().ln_1p();
        grad[k] = 1.0 - 2.0 * s;
    }
    (ParameterVector::from_array(theta), logj, grad)
}

/// `d theta_k / d eta_k`.
pub fn transform_derivative(eta: &[f64; 4], prior: &PriorSpec) -> [f64; 4] {
    let mut d = [0.0; 4];
    for k in 0..4 {
        let (lo, hi) = prior.bounds[k];
        let s = sigmoid(eta[k]);
        d[k] = (hi - lo) * s * (1.0 - s);
    }
    d
}
