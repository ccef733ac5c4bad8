use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AeromError, Architecture, LossHistory};
use crate::euler1d::{Grid, PrimitiveField, DIAPHRAGM};
use crate::nn::{ParameterSet, Tape, Tensor, Var};
use crate::sampling::{container, NormalizationStats, ParameterVector};

const KIND: &str = "checkpoint";

/// Seeds, epoch counts and loss curves recorded during training.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub ae_seed: u64,
    pub ae_epochs: usize,
    pub ae_history: LossHistory,
    pub forward_seed: Option<u64>,
    pub forward_epochs: usize,
    pub forward_history: Option<LossHistory>,
    pub n_train: usize,
    pub n_val: usize,
}

/// Encoder, decoder and latent forward operator with the normalization
/// they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct AeRomBundle {
    pub arch: Architecture,
    pub grid: Grid,
    pub stats: NormalizationStats,
    pub encoder: ParameterSet,
    pub decoder: ParameterSet,
    /// `None` until the forward operator has been trained.
    pub forward: Option<ParameterSet>,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    architecture: Architecture,
    grid: Grid,
    stats: NormalizationStats,
    metadata: TrainingMetadata,
    encoder: Vec<ParamEntry>,
    decoder: Vec<ParamEntry>,
    forward: Option<Vec<ParamEntry>>,
}

fn entries(p: &ParameterSet) -> Vec<ParamEntry> {
    p.names().iter().zip(p.tensors()).map(|(n, t)| ParamEntry { name: n.clone(), shape: t.shape().to_vec() }).collect()
}

fn rebuild(entries: &[ParamEntry], payload: &[f64], offset: &mut usize) -> Result<ParameterSet, AeromError> {
    let mut p = ParameterSet::new();
    for e in entries {
        let n: usize = e.shape.iter().product();
        let end = *offset + n;
        if end > payload.len() {
            return Err(container::ContainerError::Length(format!("parameter {} runs past the payload", e.name)).into());
        }
        p.insert(e.name.clone(), Tensor::new(e.shape.clone(), payload[*offset..end].to_vec())?)?;
        *offset = end;
    }
    Ok(p)
}

/// Flat indices into a `(1, 3, nx)` block mapping `theta` to the initial
/// condition; the velocity channel stays zero.
fn ic_index(grid: &Grid) -> Vec<Option<usize>> {
    let nx = grid.nx;
    let mut idx = vec![None; 3 * nx];
    for i in 0..nx {
        let left = grid.cell_center(i) <= DIAPHRAGM;
        idx[i] = Some(if left { 0 } else { 2 });
        idx[2 * nx + i] = Some(if left { 1 } else { 3 });
    }
    idx
}

impl AeRomBundle {
    /// Freshly initialized bundle (no forward operator).
    pub fn init(arch: Architecture, grid: Grid, stats: NormalizationStats, seed: u64) -> Result<Self, AeromError> {
        arch.validate()?;
        if arch.nx != grid.nx {
            return Err(AeromError::Grid { expected: arch.nx, found: grid.nx });
        }
        Ok(Self {
            encoder: arch.init_encoder(seed),
            decoder: arch.init_decoder(seed.wrapping_add(1)),
            forward: None,
            arch,
            grid,
            stats,
            metadata: TrainingMetadata { ae_seed: seed, ..Default::default() },
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    fn check_field(&self, field: &PrimitiveField) -> Result<(), AeromError> {
        if field.len() != self.grid.nx || field.u.len() != field.len() || field.p.len() != field.len() {
            return Err(AeromError::Grid { expected: self.grid.nx, found: field.rho.len() });
        }
        Ok(())
    }

    /// Latent code of a physical field.
    pub fn encode(&self, field: &PrimitiveField) -> Result<Vec<f64>, AeromError> {
        self.check_field(field)?;
        let mut t = Tape::new();
        let ev = self.encoder.register(&mut t, false);
        let x = t.constant(Tensor::new(vec![1, 3, self.grid.nx], self.stats.normalize(field))?);
        let z = self.arch.encoder(&mut t, &ev, x)?;
        Ok(t.value(z).data().to_vec())
    }

    /// Physical field reconstructed from a latent code.
    pub fn decode(&self, z: &[f64]) -> Result<PrimitiveField, AeromError> {
        if z.len() != self.latent_dim() {
            return Err(AeromError::Latent { expected: self.latent_dim(), found: z.len() });
        }
        let mut t = Tape::new();
        let dv = self.decoder.register(&mut t, false);
        let zv = t.constant(Tensor::new(vec![1, z.len()], z.to_vec())?);
        let x = self.arch.decoder(&mut t, &dv, zv)?;
        Ok(self.stats.denormalize(t.value(x).data()))
    }

    /// Records `theta -> IC -> normalize -> encoder -> F -> decoder ->
    /// denormalize` on `tape`. Returns the `theta` leaf (shape `[4]`) and the
    /// physical-unit prediction of shape `(1, 3, nx)`.
    pub fn record_prediction(&self, tape: &mut Tape, theta: &ParameterVector) -> Result<(Var, Var), AeromError> {
        let fwd = self.forward.as_ref().ok_or(AeromError::Untrained)?;
        if !theta.is_positive() {
            return Err(AeromError::Config(format!("theta must be positive, got {theta:?}")));
        }
        let nx = self.grid.nx;
        let s = &self.stats;
        let th = tape.leaf(Tensor::from_vec(theta.to_array().to_vec()), true);
        let ic = tape.gather(th, ic_index(&self.grid), &[1, 3, nx])?;
        let inv: Vec<f64> = s.std.iter().map(|v| 1.0 / v).collect();
        let shift: Vec<f64> = (0..3).map(|c| -s.mean[c] / s.std[c]).collect();
        let xn = tape.channel_affine(ic, &inv, &shift)?;
        let ev = self.encoder.register(tape, false);
        let fv = fwd.register(tape, false);
        let dv = self.decoder.register(tape, false);
        let z0 = self.arch.encoder(tape, &ev, xn)?;
        let zf = self.arch.forward_operator(tape, &fv, z0)?;
        let yn = self.arch.decoder(tape, &dv, zf)?;
        let y = tape.channel_affine(yn, &s.std, &s.mean)?;
        Ok((th, y))
    }

    /// Surrogate final-time field for `theta`.
    pub fn predict_final(&self, theta: &ParameterVector) -> Result<PrimitiveField, AeromError> {
        let mut t = Tape::new();
        let (_, y) = self.record_prediction(&mut t, theta)?;
        Ok(PrimitiveField::from_flat(t.value(y).data())?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, AeromError> {
        let header = Header {
            architecture: self.arch.clone(),
            grid: self.grid.clone(),
            stats: self.stats,
            metadata: self.metadata.clone(),
            encoder: entries(&self.encoder),
            decoder: entries(&self.decoder),
            forward: self.forward.as_ref().map(entries),
        };
        let mut payload = self.encoder.flatten();
        payload.extend(self.decoder.flatten());
        if let Some(f) = &self.forward {
            payload.extend(f.flatten());
        }
        Ok(container::encode(KIND, &header, &payload)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AeromError> {
        let (h, payload): (Header, Vec<f64>) = container::decode(KIND, bytes)?;
        let mut off = 0;
        let encoder = rebuild(&h.encoder, &payload, &mut off)?;
        let decoder = rebuild(&h.decoder, &payload, &mut off)?;
        let forward = h.forward.as_deref().map(|e| rebuild(e, &payload, &mut off)).transpose()?;
        if off != payload.len() {
            return Err(container::ContainerError::Length(format!("{} trailing payload values", payload.len() - off)).into());
        }
        let arch = h.architecture;
        arch.validate()?;
        let expect = (arch.init_encoder(0), arch.init_decoder(0), arch.init_forward(0));
        let same = |a: &ParameterSet, b: &ParameterSet| {
            a.names() == b.names() && a.tensors().iter().zip(b.tensors()).all(|(x, y)| x.shape() == y.shape())
        };
        if !same(&encoder, &expect.0) || !same(&decoder, &expect.1) || forward.as_ref().is_some_and(|f| !same(f, &expect.2)) {
            return Err(AeromError::Config("checkpoint parameters do not match the recorded architecture".into()));
        }
        Ok(Self { arch, grid: h.grid, stats: h.stats, encoder, decoder, forward, metadata: h.metadata })
    }

    pub fn save(&self, path: &Path) -> Result<(), AeromError> {
        std::fs::write(path, self.to_bytes()?).map_err(container::ContainerError::from)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AeromError> {
        let bytes = std::fs::read(path).map_err(container::ContainerError::from)?;
        Self::from_bytes(&bytes)
    }
}
