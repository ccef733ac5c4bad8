//! Parameter-space sampling and high-fidelity snapshot datasets.

pub mod container;
mod dataset;
mod lhs;
mod normalize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::euler1d::SolverError;

pub use container::ContainerError;
pub use dataset::{generate_dataset, load_dataset, save_dataset, split_dataset, Dataset, SnapshotPair};
pub use lhs::lhs_sample;
pub use normalize::{fit_normalization, NormalizationStats};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("solver failed on parameter vector {index}: {source}")]
    Solver { index: usize, source: SolverError },
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("zero variance in the {channel} channel")]
    ZeroVariance { channel: &'static str },
    #[error("invalid dataset request: {0}")]
    Invalid(String),
}

/// `theta = [rho_L, p_L, rho_R, p_R]`, in that order everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub rho_l: f64,
    pub p_l: f64,
    pub rho_r: f64,
    pub p_r: f64,
}

impl ParameterVector {
    pub const NAMES: [&'static str; 4] = ["rho_L", "p_L", "rho_R", "p_R"];

    pub const fn new(rho_l: f64, p_l: f64, rho_r: f64, p_r: f64) -> Self {
        Self { rho_l, p_l, rho_r, p_r }
    }

    /// The classical Sod states.
    pub const fn sod() -> Self {
        Self::new(1.0, 1.0, 0.125, 0.1)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rho_l, self.p_l, self.rho_r, self.p_r]
    }

    pub fn is_positive(&self) -> bool {
        self.to_array().iter().all(|&v| v > 0.0 && v.is_finite())
    }
}

/// Per-component `(low, high)` sampling bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub bounds: [(f64, f64); 4],
}

impl ParameterRanges {
    pub fn new(bounds: [(f64, f64); 4]) -> Result<Self, DatasetError> {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(DatasetError::Invalid(format!(
                    "{}: low {lo} must be below high {hi}",
                    ParameterVector::NAMES[k]
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// Training-data ranges of the shock-tube study.
    pub const fn shock_tube() -> Self {
        Self { bounds: [(0.5, 1.5), (0.5, 1.5), (0.05, 0.15), (0.05, 0.15)] }
    }

    pub fn contains(&self, theta: &ParameterVector) -> bool {
        theta.to_array().iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self::shock_tube()
    }
}
