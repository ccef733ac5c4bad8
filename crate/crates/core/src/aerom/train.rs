use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AeRomBundle, AeromError, Architecture};
use crate::nn::{adam_step, AdamConfig, AdamState, NnError, ParameterSet, Tape, Tensor, Var};
use crate::sampling::{fit_normalization, Dataset};

const EVAL_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    pub latent_dim: usize,
    /// Use only the first `n_sim` pairs of the dataset.
    pub n_sim: Option<usize>,
    pub forward_epochs: usize,
    /// When set, the learning rate follows a cosine decay from
    /// `learning_rate` to this value over the epochs of each training run.
    pub final_learning_rate: Option<f64>,
    /// Weight of an optional decoded-field term added to the latent loss of
    /// the forward operator; zero disables it.
    pub decoded_loss_weight: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 4,
            learning_rate: 1e-3,
            seed: 0,
            latent_dim: 32,
            n_sim: None,
            forward_epochs: 200,
            final_learning_rate: Some(1e-5),
            decoded_loss_weight: 0.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), AeromError> {
        if self.epochs == 0 || self.batch_size == 0 || self.latent_dim == 0 || self.forward_epochs == 0 {
            return Err(AeromError::Config("epochs, batch size, latent dim and forward epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AeromError::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.decoded_loss_weight >= 0.0 && self.decoded_loss_weight.is_finite()) {
            return Err(AeromError::Config("decoded_loss_weight must be a finite nonnegative number".into()));
        }
        if let Some(lr) = self.final_learning_rate {
            if !(lr > 0.0 && lr <= self.learning_rate) {
                return Err(AeromError::Config(format!("final learning rate must lie in (0, {}], got {lr}", self.learning_rate)));
            }
        }
        if self.n_sim == Some(0) {
            return Err(AeromError::Config("n_sim must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, ..AdamConfig::default() }
    }

    /// Learning rate for `epoch` (0-based) of a run lasting `epochs`.
    pub fn learning_rate_at(&self, epoch: usize, epochs: usize) -> f64 {
        match self.final_learning_rate {
            None => self.learning_rate,
            Some(end) => {
                let frac = if epochs > 1 { epoch as f64 / (epochs - 1) as f64 } else { 1.0 };
                end + 0.5 * (self.learning_rate - end) * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

/// Per-epoch mean training and validation loss.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    /// `epoch,train_mse,val_mse` with 1-based epochs.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse\n");
        for (i, (t, v)) in self.train.iter().zip(&self.val).enumerate() {
            writeln!(s, "{},{t:e},{v:e}", i + 1).expect("write to string");
        }
        s
    }
}

/// Validation error of an autoencoder in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionError {
    pub total: f64,
    /// `rho, u, p`.
    pub per_channel: [f64; 3],
}

/// Normalized `(3, nx)` snapshots, `x0` and `xf` of each selected pair.
fn snapshots(bundle: &AeRomBundle, dataset: &Dataset, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .flat_map(|&i| {
            let p = &dataset.pairs[i];
            [bundle.stats.normalize(&p.x0), bundle.stats.normalize(&p.xf)]
        })
        .collect()
}

fn stack(samples: &[Vec<f64>], order: &[usize], tail: &[usize]) -> Result<Tensor, NnError> {
    let width = samples[order[0]].len();
    let mut data = Vec::with_capacity(order.len() * width);
    for &i in order {
        data.extend_from_slice(&samples[i]);
    }
    let mut shape = vec![order.len()];
    shape.extend_from_slice(tail);
    Tensor::new(shape, data)
}

fn check_loss(loss: f64, epoch: usize, batch: usize) -> Result<(), AeromError> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(AeromError::NonFiniteLoss { epoch: epoch + 1, batch: batch + 1, value: loss })
    }
}

/// Squared reconstruction error of the AE on `samples`, in the loss units.
fn reconstruction_error(bundle: &AeRomBundle, samples: &[Vec<f64>]) -> Result<ReconstructionError, AeromError> {
    let nx = bundle.grid.nx;
    let mut per = [0.0; 3];
    let all: Vec<usize> = (0..samples.len()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let mut t = Tape::new();
        let ev = bundle.encoder.register(&mut t, false);
        let dv = bundle.decoder.register(&mut t, false);
        let x = stack(samples, chunk, &[3, nx])?;
        let xv = t.constant(x);
        let z = bundle.arch.encoder(&mut t, &ev, xv)?;
        let y = bundle.arch.decoder(&mut t, &dv, z)?;
        let (a, b) = (t.value(y).data(), t.value(xv).data());
        for (k, (p, q)) in a.iter().zip(b).enumerate() {
            per[(k / nx) % 3] += (p - q) * (p - q);
        }
    }
    let denom = (samples.len() * nx) as f64;
    let per_channel = per.map(|s| s / denom);
    Ok(ReconstructionError { total: per_channel.iter().sum::<f64>() / 3.0, per_channel })
}

/// Validation reconstruction error on both snapshots of the `val` pairs.
pub fn evaluate_autoencoder(bundle: &AeRomBundle, dataset: &Dataset, val: &[usize]) -> Result<ReconstructionError, AeromError> {
    if val.is_empty() {
        return Err(AeromError::Config("validation split is empty".into()));
    }
    reconstruction_error(bundle, &snapshots(bundle, dataset, val))
}

fn check_split(dataset: &Dataset, train: &[usize], val: &[usize]) -> Result<(), AeromError> {
    if train.is_empty() || val.is_empty() {
        return Err(AeromError::Config("train and validation splits must be nonempty".into()));
    }
    if let Some(&bad) = train.iter().chain(val).find(|&&i| i >= dataset.len()) {
        return Err(AeromError::Config(format!("split index {bad} out of range for {} pairs", dataset.len())));
    }
    Ok(())
}

/// Gradient step on `params` from the tape; returns the batch loss.
fn step(
    tape: &mut Tape,
    loss: Var,
    vars: &[Var],
    params: &mut ParameterSet,
    adam: &mut AdamState,
    epoch: usize,
    batch: usize,
) -> Result<f64, AeromError> {
    let value = tape.value(loss).data()[0];
    check_loss(value, epoch, batch)?;
    let mut g = tape.backward(loss)?;
    let grads: Vec<Tensor> = vars.iter().map(|&v| g.take(v)).collect();
    adam_step(params, &grads, adam)?;
    Ok(value)
}

/// Fits encoder and decoder to reconstruct the initial and final snapshots
/// of the training pairs. Normalization is fitted on the training pairs.
pub fn train_autoencoder(
    dataset: &Dataset,
    train: &[usize],
    val: &[usize],
    config: &TrainingConfig,
) -> Result<AeRomBundle, AeromError> {
    config.validate()?;
    check_split(dataset, train, val)?;
    let arch = Architecture::new(dataset.grid.nx, config.latent_dim);
    let stats = fit_normalization(dataset, train)?;
    let mut bundle = AeRomBundle::init(arch, dataset.grid.clone(), stats, config.seed)?;
    let train_x = snapshots(&bundle, dataset, train);
    let val_x = snapshots(&bundle, dataset, val);
    if config.batch_size > train_x.len() {
        return Err(AeromError::Config(format!(
            "batch size {} exceeds the {} training snapshots",
            config.batch_size,
            train_x.len()
        )));
    }
    let nx = dataset.grid.nx;
    let mut adam_enc = AdamState::new(&bundle.encoder, config.adam());
    let mut adam_dec = AdamState::new(&bundle.decoder, config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ae00);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = LossHistory::default();

    for epoch in 0..config.epochs {
        adam_enc.config.lr = config.learning_rate_at(epoch, config.epochs);
        adam_dec.config.lr = adam_enc.config.lr;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut t = Tape::new();
            let ev = bundle.encoder.register(&mut t, true);
            let dv = bundle.decoder.register(&mut t, true);
            let x = t.constant(stack(&train_x, chunk, &[3, nx])?);
            let z = bundle.arch.encoder(&mut t, &ev, x)?;
            let y = bundle.arch.decoder(&mut t, &dv, z)?;
            let loss = t.mse(y, x)?;
            let value = t.value(loss).data()[0];
            check_loss(value, epoch, b)?;
            let mut g = t.backward(loss)?;
            let ge: Vec<Tensor> = ev.iter().map(|&v| g.take(v)).collect();
            let gd: Vec<Tensor> = dv.iter().map(|&v| g.take(v)).collect();
            adam_step(&mut bundle.encoder, &ge, &mut adam_enc)?;
            adam_step(&mut bundle.decoder, &gd, &mut adam_dec)?;
            total += value * chunk.len() as f64;
        }
        history.train.push(total / train_x.len() as f64);
        history.val.push(reconstruction_error(&bundle, &val_x)?.total);
    }
    bundle.metadata.ae_epochs = config.epochs;
    bundle.metadata.ae_history = history;
    bundle.metadata.n_train = train.len();
    bundle.metadata.n_val = val.len();
    Ok(bundle)
}

/// Latent codes (row-major `(n, N_z)`) of the given normalized snapshots.
fn latents(bundle: &AeRomBundle, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, AeromError> {
    let nx = bundle.grid.nx;
    let nz = bundle.latent_dim();
    let mut out = Vec::with_capacity(samples.len());
    let all: Vec<usize> = (0..samples.len()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let mut t = Tape::new();
        let ev = bundle.encoder.register(&mut t, false);
        let x = t.constant(stack(samples, chunk, &[3, nx])?);
        let z = bundle.arch.encoder(&mut t, &ev, x)?;
        out.extend(t.value(z).data().chunks(nz).map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Componentwise mean and population std, with the std floored so that a
/// constant latent coordinate is passed through unscaled.
fn latent_moments(z: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = z.len() as f64;
    let nz = z[0].len();
    let mean: Vec<f64> = (0..nz).map(|k| z.iter().map(|v| v[k]).sum::<f64>() / n).collect();
    let std = (0..nz)
        .map(|k| {
            let var = z.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / n;
            if var.sqrt() > 1e-8 { var.sqrt() } else { 1.0 }
        })
        .collect();
    (mean, std)
}

/// Fits the latent forward operator `F(Φ(x0)) ≈ Φ(xf)` with the encoder
/// frozen. The batch is capped at the number of training pairs.
pub fn train_forward_operator(
    bundle: &mut AeRomBundle,
    dataset: &Dataset,
    train: &[usize],
    val: &[usize],
    config: &TrainingConfig,
) -> Result<LossHistory, AeromError> {
    config.validate()?;
    check_split(dataset, train, val)?;
    if dataset.grid.nx != bundle.grid.nx {
        return Err(AeromError::Grid { expected: bundle.grid.nx, found: dataset.grid.nx });
    }
    let nz = bundle.latent_dim();
    let nx = bundle.grid.nx;
    let norm = |idx: &[usize], final_state: bool| -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| {
                let p = &dataset.pairs[i];
                bundle.stats.normalize(if final_state { &p.xf } else { &p.x0 })
            })
            .collect()
    };
    let (tr0, trf, va0, vaf) = (norm(train, false), norm(train, true), norm(val, false), norm(val, true));
    let (z0, zf) = (latents(bundle, &tr0)?, latents(bundle, &trf)?);
    let (vz0, vzf) = (latents(bundle, &va0)?, latents(bundle, &vaf)?);

    let seed = config.seed.wrapping_add(0xf0);
    let mut fwd = bundle.arch.init_forward(seed);
    let (mean, std) = latent_moments(&z0);
    let mut flat = fwd.flatten();
    flat[..nz].copy_from_slice(&mean);
    flat[nz..2 * nz].copy_from_slice(&std);
    fwd.assign_flat(&flat)?;
    let mut adam = AdamState::new(&fwd, config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = config.batch_size.min(train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = LossHistory::default();
    let w = config.decoded_loss_weight;

    let val_loss = |fwd: &ParameterSet| -> Result<f64, AeromError> {
        let mut t = Tape::new();
        let fv = fwd.register(&mut t, false);
        let all: Vec<usize> = (0..vz0.len()).collect();
        let input = t.constant(stack(&vz0, &all, &[nz])?);
        let target = t.constant(stack(&vzf, &all, &[nz])?);
        let pred = bundle.arch.forward_operator(&mut t, &fv, input)?;
        let loss = t.mse(pred, target)?;
        Ok(t.value(loss).data()[0])
    };

    for epoch in 0..config.forward_epochs {
        adam.config.lr = config.learning_rate_at(epoch, config.forward_epochs);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(batch).enumerate() {
            let mut t = Tape::new();
            let fv = fwd.register(&mut t, true);
            let input = t.constant(stack(&z0, chunk, &[nz])?);
            let target = t.constant(stack(&zf, chunk, &[nz])?);
            let pred = bundle.arch.forward_operator(&mut t, &fv, input)?;
            let mut loss = t.mse(pred, target)?;
            if w > 0.0 {
                let dv = bundle.decoder.register(&mut t, false);
                let field = bundle.arch.decoder(&mut t, &dv, pred)?;
                let truth = t.constant(stack(&trf, chunk, &[3, nx])?);
                let aux = t.mse(field, truth)?;
                let aux = t.scale(aux, w);
                loss = t.add(loss, aux)?;
            }
            total += step(&mut t, loss, &fv, &mut fwd, &mut adam, epoch, b)? * chunk.len() as f64;
        }
        history.train.push(total / train.len() as f64);
        history.val.push(val_loss(&fwd)?);
    }
    bundle.forward = Some(fwd);
    bundle.metadata.forward_seed = Some(seed);
    bundle.metadata.forward_epochs = config.forward_epochs;
    bundle.metadata.forward_history = Some(history.clone());
    Ok(history)
}
