//! Convolutional autoencoder reduced-order model.
//!
//! The encoder maps a `(3, nx)` primitive field to a latent vector, the
//! decoder maps it back, and a small MLP advances the latent code of the
//! initial condition to that of the final-time state.

mod arch;
mod bundle;
mod study;
mod train;

use thiserror::Error;

use crate::euler1d::SolverError;
use crate::nn::NnError;
use crate::sampling::{ContainerError, DatasetError};

pub use arch::Architecture;
pub use bundle::{AeRomBundle, TrainingMetadata};
pub use study::{data_scaling_study, latent_sweep, pod_baseline, SweepResult, SweepRow, TRAIN_FRACTION};
pub use train::{
    evaluate_autoencoder, train_autoencoder, train_forward_operator, LossHistory, ReconstructionError, TrainingConfig,
};

#[derive(Debug, Error)]
pub enum AeromError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("field has {found} cells, the bundle was trained on {expected}")]
    Grid { expected: usize, found: usize },
    #[error("latent vector has length {found}, expected {expected}")]
    Latent { expected: usize, found: usize },
    #[error("forward operator has not been trained")]
    Untrained,
    #[error("non-finite loss {value} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[cfg(test)]
mod tests;
