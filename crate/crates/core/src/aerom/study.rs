use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_autoencoder, train_autoencoder, AeromError, ReconstructionError, TrainingConfig};
use crate::sampling::{split_dataset, Dataset, NormalizationStats};

/// Fraction of pairs used for training in the studies.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub val_mse: f64,
    pub val_mse_rho: f64,
    pub val_mse_u: f64,
    pub val_mse_p: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// `latent_dim` or `n_sim`.
    pub variable: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},val_mse,val_mse_rho,val_mse_u,val_mse_p,train_seconds\n", self.variable);
        for r in &self.rows {
            writeln!(s, "{},{:e},{:e},{:e},{:e},{:.3}", r.value, r.val_mse, r.val_mse_rho, r.val_mse_u, r.val_mse_p, r.train_seconds)
                .expect("write to string");
        }
        s
    }

    pub fn mse(&self, value: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.value == value).map(|r| r.val_mse)
    }
}

fn row(value: usize, err: ReconstructionError, secs: f64) -> SweepRow {
    SweepRow {
        value,
        val_mse: err.total,
        val_mse_rho: err.per_channel[0],
        val_mse_u: err.per_channel[1],
        val_mse_p: err.per_channel[2],
        train_seconds: secs,
    }
}

fn train_and_score(dataset: &Dataset, config: &TrainingConfig) -> Result<(ReconstructionError, f64), AeromError> {
    let (train, val) = split_dataset(dataset.len(), TRAIN_FRACTION, config.seed)?;
    let mut cfg = config.clone();
    cfg.batch_size = cfg.batch_size.min(2 * train.len());
    let start = Instant::now();
    let bundle = train_autoencoder(dataset, &train, &val, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((evaluate_autoencoder(&bundle, dataset, &val)?, secs))
}

/// One autoencoder per latent dimension, identical seeds and budget.
pub fn latent_sweep(dataset: &Dataset, latent_dims: &[usize], config: &TrainingConfig) -> Result<SweepResult, AeromError> {
    if latent_dims.is_empty() {
        return Err(AeromError::Config("latent sweep needs at least one value".into()));
    }
    let data = match config.n_sim {
        Some(n) => budget(dataset, n)?,
        None => dataset.clone(),
    };
    let rows = latent_dims
        .par_iter()
        .map(|&nz| {
            let cfg = TrainingConfig { latent_dim: nz, ..config.clone() };
            let (err, secs) = train_and_score(&data, &cfg)?;
            Ok(row(nz, err, secs))
        })
        .collect::<Result<Vec<_>, AeromError>>()?;
    Ok(SweepResult { variable: "latent_dim".into(), rows })
}

fn budget(dataset: &Dataset, n: usize) -> Result<Dataset, AeromError> {
    if n > dataset.len() || n < 2 {
        return Err(AeromError::Config(format!("budget {n} not available in a dataset of {} pairs", dataset.len())));
    }
    Ok(dataset.truncated(n))
}

/// One autoencoder per simulation budget; each budget takes the first
/// `n_sim` pairs and its own 80/20 split.
pub fn data_scaling_study(dataset: &Dataset, budgets: &[usize], config: &TrainingConfig) -> Result<SweepResult, AeromError> {
    if budgets.is_empty() {
        return Err(AeromError::Config("data scaling study needs at least one budget".into()));
    }
    let subsets = budgets.iter().map(|&n| budget(dataset, n)).collect::<Result<Vec<_>, _>>()?;
    let rows = budgets
        .par_iter()
        .zip(subsets.par_iter())
        .map(|(&n, data)| {
            let (err, secs) = train_and_score(data, config)?;
            Ok(row(n, err, secs))
        })
        .collect::<Result<Vec<_>, AeromError>>()?;
    Ok(SweepResult { variable: "n_sim".into(), rows })
}

/// Validation error of projecting normalized snapshots onto the leading
/// `modes` left singular vectors of the training snapshot matrix.
pub fn pod_baseline(
    dataset: &Dataset,
    train: &[usize],
    val: &[usize],
    stats: &NormalizationStats,
    modes: usize,
) -> Result<ReconstructionError, AeromError> {
    let gather = |idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter()
            .flat_map(|&i| [stats.normalize(&dataset.pairs[i].x0), stats.normalize(&dataset.pairs[i].xf)])
            .collect()
    };
    let (tr, va) = (gather(train), gather(val));
    if tr.is_empty() || va.is_empty() || modes == 0 {
        return Err(AeromError::Config("POD baseline needs snapshots and at least one mode".into()));
    }
    let dim = tr[0].len();
    let n = tr.len();
    let gram = DMatrix::from_fn(n, n, |i, j| tr[i].iter().zip(&tr[j]).map(|(a, b)| a * b).sum::<f64>());
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    let basis: Vec<Vec<f64>> = order
        .iter()
        .filter(|&&k| eig.eigenvalues[k] > 1e-12 * top)
        .take(modes)
        .map(|&k| {
            let s = eig.eigenvalues[k].sqrt();
            let v = eig.eigenvectors.column(k);
            (0..dim).map(|d| (0..n).map(|i| v[i] * tr[i][d]).sum::<f64>() / s).collect()
        })
        .collect();
    let nx = dim / 3;
    let mut per = [0.0; 3];
    for x in &va {
        let mut proj = vec![0.0; dim];
        for u in &basis {
            let c: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            proj.iter_mut().zip(u).for_each(|(p, ui)| *p += c * ui);
        }
        for (k, (p, q)) in proj.iter().zip(x).enumerate() {
            per[k / nx] += (p - q) * (p - q);
        }
    }
    let denom = (va.len() * nx) as f64;
    let per_channel = per.map(|s| s / denom);
    Ok(ReconstructionError { total: per_channel.iter().sum::<f64>() / 3.0, per_channel })
}
