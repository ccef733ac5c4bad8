use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{container, DatasetError, ParameterVector};
use crate::euler1d::{build_initial_condition, solve, Grid, PrimitiveField, SolverConfig};

const KIND: &str = "dataset";

/// Initial and final-time snapshots for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub theta: ParameterVector,
    pub x0: PrimitiveField,
    pub xf: PrimitiveField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: Grid,
    pub solver: SolverConfig,
    pub seed: u64,
    pub pairs: Vec<SnapshotPair>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    grid: Grid,
    seed: u64,
    solver_config: SolverConfig,
    solver_config_hash: String,
    pair_count: usize,
    channel_order: Vec<String>,
}

/// FNV-1a over the canonical JSON of the solver configuration.
pub(crate) fn config_hash(config: &SolverConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("solver config serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn solver_config_hash(&self) -> String {
        config_hash(&self.solver)
    }

    /// First `n` pairs, keeping grid and metadata.
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset { pairs: self.pairs[..n.min(self.len())].to_vec(), ..self.clone() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, DatasetError> {
        let nx = self.grid.nx;
        let mut payload = Vec::with_capacity(self.len() * (4 + 6 * nx));
        for pair in &self.pairs {
            payload.extend_from_slice(&pair.theta.to_array());
            payload.extend(pair.x0.to_flat());
            payload.extend(pair.xf.to_flat());
        }
        let header = Header {
            grid: self.grid.clone(),
            seed: self.seed,
            solver_config: self.solver.clone(),
            solver_config_hash: self.solver_config_hash(),
            pair_count: self.len(),
            channel_order: vec!["rho".into(), "u".into(), "p".into()],
        };
        Ok(container::encode(KIND, &header, &payload)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Dataset, DatasetError> {
        let (header, payload): (Header, Vec<f64>) = container::decode(KIND, bytes)?;
        let grid = Grid::new(header.grid.nx, header.grid.x_min, header.grid.x_max)
            .map_err(|e| container::ContainerError::Header(e.to_string()))?;
        if header.channel_order != ["rho", "u", "p"] {
            return Err(container::ContainerError::Header(format!(
                "unsupported channel order {:?}",
                header.channel_order
            ))
            .into());
        }
        if header.solver_config_hash != config_hash(&header.solver_config) {
            return Err(container::ContainerError::Header("solver config hash does not match".into()).into());
        }
        let stride = 4 + 6 * grid.nx;
        if payload.len() != header.pair_count * stride {
            return Err(container::ContainerError::Length(format!(
                "{} pairs of {} values need {} values, payload has {}",
                header.pair_count,
                stride,
                header.pair_count * stride,
                payload.len()
            ))
            .into());
        }
        let nx3 = 3 * grid.nx;
        let pairs = payload
            .chunks_exact(stride)
            .map(|c| {
                let theta = ParameterVector::from_array([c[0], c[1], c[2], c[3]]);
                let x0 = PrimitiveField::from_flat(&c[4..4 + nx3]).expect("multiple of 3");
                let xf = PrimitiveField::from_flat(&c[4 + nx3..]).expect("multiple of 3");
                SnapshotPair { theta, x0, xf }
            })
            .collect();
        Ok(Dataset { grid, solver: header.solver_config, seed: header.seed, pairs })
    }
}

/// Runs the high-fidelity solver for every `theta`, preserving order.
///
/// Solves fan out over the current rayon pool.
pub fn generate_dataset(
    thetas: &[ParameterVector],
    grid: &Grid,
    config: &SolverConfig,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    config.validate().map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let pairs = thetas
        .par_iter()
        .enumerate()
        .map(|(index, theta)| {
            let x0 = build_initial_condition(theta, grid).map_err(|source| DatasetError::Solver { index, source })?;
            let xf = solve(&x0, grid, config).map_err(|source| DatasetError::Solver { index, source })?;
            Ok(SnapshotPair { theta: *theta, x0, xf })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok(Dataset { grid: grid.clone(), solver: config.clone(), seed, pairs })
}

/// Seeded random split into disjoint, covering `(train, validation)` index sets.
pub fn split_dataset(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Invalid(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    if n < 2 {
        return Err(DatasetError::Invalid(format!("cannot split {n} pairs into two nonempty sets")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, dataset.to_bytes()?).map_err(container::ContainerError::from)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let bytes = std::fs::read(path).map_err(container::ContainerError::from)?;
    Dataset::from_bytes(&bytes)
}
