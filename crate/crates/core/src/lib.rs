//! Surrogate-accelerated Bayesian inference for the 1D shock tube.

pub mod aerom;
pub mod bayes;
pub mod euler1d;
pub mod nn;
pub mod sampling;
