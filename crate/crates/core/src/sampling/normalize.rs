use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{container, Dataset, DatasetError};
use crate::euler1d::PrimitiveField;

pub const CHANNELS: [&str; 3] = ["rho", "u", "p"];

/// Per-channel standardization `(x - mean) / std` for `rho, u, p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormalizationStats {
    pub const IDENTITY: Self = Self { mean: [0.0; 3], std: [1.0; 3] };

    /// Normalized `(3, nx)` flat layout.
    pub fn normalize(&self, field: &PrimitiveField) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * field.len());
        for (c, ch) in field.channels().iter().enumerate() {
            out.extend(ch.iter().map(|v| (v - self.mean[c]) / self.std[c]));
        }
        out
    }

    /// Maps a normalized `(3, nx)` flat block back to physical units.
    pub fn denormalize(&self, flat: &[f64]) -> PrimitiveField {
        let n = flat.len() / 3;
        let chan = |c: usize| flat[c * n..(c + 1) * n].iter().map(|v| v * self.std[c] + self.mean[c]).collect();
        PrimitiveField { rho: chan(0), u: chan(1), p: chan(2) }
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let payload = [self.mean.as_slice(), self.std.as_slice()].concat();
        container::write_file(path, "stats", &serde_json::json!({ "channel_order": CHANNELS }), &payload)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let (_, p): (serde_json::Value, Vec<f64>) = container::read_file(path, "stats")?;
        if p.len() != 6 {
            return Err(container::ContainerError::Length(format!("stats need 6 values, found {}", p.len())).into());
        }
        Ok(Self { mean: [p[0], p[1], p[2]], std: [p[3], p[4], p[5]] })
    }
}

/// Channel mean and (population) standard deviation over the initial and
/// final snapshots of the training pairs.
pub fn fit_normalization(dataset: &Dataset, train: &[usize]) -> Result<NormalizationStats, DatasetError> {
    if train.is_empty() {
        return Err(DatasetError::Invalid("training split is empty".into()));
    }
    let mut stats = NormalizationStats::IDENTITY;
    for c in 0..3 {
        let values = || {
            train.iter().flat_map(move |&i| {
                let pair = &dataset.pairs[i];
                pair.x0.channels()[c].iter().chain(pair.xf.channels()[c].iter()).copied()
            })
        };
        let count = values().count() as f64;
        let mean = values().sum::<f64>() / count;
        let var = values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        let std = var.sqrt();
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            return Err(DatasetError::ZeroVariance { channel: CHANNELS[c] });
        }
        stats.mean[c] = mean;
        stats.std[c] = std;
    }
    Ok(stats)
}
