use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AeromError;
use crate::nn::{conv_out_len, init_uniform, Activation, NnError, ParameterSet, Tape, Tensor, Var};

const ACT: Activation = Activation::Gelu;

/// Layer sizes of the encoder, decoder and latent forward operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub nx: usize,
    pub latent_dim: usize,
    /// Encoder channel widths starting with the 3 physical channels.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Hidden widths of the forward operator MLP.
    pub forward_hidden: Vec<usize>,
}

impl Architecture {
    pub fn new(nx: usize, latent_dim: usize) -> Self {
        Self {
            nx,
            latent_dim,
            channels: vec![3, 16, 32, 64, 128],
            kernel: 5,
            stride: 2,
            padding: 2,
            forward_hidden: vec![128, 128],
        }
    }

    pub fn validate(&self) -> Result<(), AeromError> {
        let bad = |m: String| Err(AeromError::Config(m));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive".into());
        }
        if self.channels.len() < 2 || self.channels[0] != 3 || self.channels.contains(&0) {
            return bad(format!("channels must start at 3 and be positive, got {:?}", self.channels));
        }
        if self.kernel % 2 == 0 || self.stride == 0 {
            return bad(format!("kernel must be odd and stride positive (kernel {}, stride {})", self.kernel, self.stride));
        }
        if self.forward_hidden.contains(&0) {
            return bad("forward_hidden widths must be positive".into());
        }
        self.lengths().map(|_| ())
    }

    /// Signal length after each encoder stage, starting with `nx`.
    pub fn lengths(&self) -> Result<Vec<usize>, AeromError> {
        let mut out = vec![self.nx];
        for _ in 1..self.channels.len() {
            let last = *out.last().expect("nonempty");
            match conv_out_len(last, self.kernel, self.stride, self.padding) {
                Some(l) if l >= 1 => out.push(l),
                _ => return Err(AeromError::Config(format!("nx = {} is too short for the encoder stack", self.nx))),
            }
        }
        Ok(out)
    }

    fn bottleneck(&self) -> (usize, usize) {
        let lens = self.lengths().expect("validated architecture");
        (*self.channels.last().expect("nonempty"), *lens.last().expect("nonempty"))
    }

    pub fn init_encoder(&self, seed: u64) -> ParameterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParameterSet::new();
        for (i, w) in self.channels.windows(2).enumerate() {
            let fan_in = w[0] * self.kernel;
            p.insert(format!("enc.conv{i}.w"), init_uniform(&[w[1], w[0], self.kernel], fan_in, &mut rng)).unwrap();
            p.insert(format!("enc.conv{i}.b"), init_uniform(&[w[1]], fan_in, &mut rng)).unwrap();
        }
        let (c, l) = self.bottleneck();
        p.insert("enc.dense.w", init_uniform(&[self.latent_dim, c * l], c * l, &mut rng)).unwrap();
        p.insert("enc.dense.b", init_uniform(&[self.latent_dim], c * l, &mut rng)).unwrap();
        p
    }

    pub fn init_decoder(&self, seed: u64) -> ParameterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParameterSet::new();
        let (c, l) = self.bottleneck();
        p.insert("dec.dense.w", init_uniform(&[c * l, self.latent_dim], self.latent_dim, &mut rng)).unwrap();
        p.insert("dec.dense.b", init_uniform(&[c * l], self.latent_dim, &mut rng)).unwrap();
        for i in (0..self.channels.len() - 1).rev() {
            let (c_in, c_out) = (self.channels[i + 1], self.channels[i]);
            // each output position receives about kernel / stride taps per input channel
            let fan_in = (c_in * self.kernel).div_ceil(self.stride);
            p.insert(format!("dec.convt{i}.w"), init_uniform(&[c_in, c_out, self.kernel], fan_in, &mut rng)).unwrap();
            p.insert(format!("dec.convt{i}.b"), init_uniform(&[c_out], fan_in, &mut rng)).unwrap();
        }
        p
    }

    /// Residual MLP `z + W_out gelu(...)` on standardized input; the output
    /// layer starts at zero so the untrained operator is the identity.
    /// `fwd.in.mean` and `fwd.in.std` are fixed statistics, not trained.
    pub fn init_forward(&self, seed: u64) -> ParameterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParameterSet::new();
        p.insert("fwd.in.mean", Tensor::zeros(&[self.latent_dim])).unwrap();
        p.insert("fwd.in.std", Tensor::full(&[self.latent_dim], 1.0)).unwrap();
        let mut width = self.latent_dim;
        for (i, &h) in self.forward_hidden.iter().enumerate() {
            p.insert(format!("fwd.dense{i}.w"), init_uniform(&[h, width], width, &mut rng)).unwrap();
            p.insert(format!("fwd.dense{i}.b"), init_uniform(&[h], width, &mut rng)).unwrap();
            width = h;
        }
        p.insert("fwd.out.w", Tensor::zeros(&[self.latent_dim, width])).unwrap();
        p.insert("fwd.out.b", Tensor::zeros(&[self.latent_dim])).unwrap();
        p
    }

    /// `x (B, 3, nx)` to `z (B, N_z)`.
    pub fn encoder(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var, NnError> {
        let batch = tape.value(x).shape()[0];
        let stages = self.channels.len() - 1;
        let mut h = x;
        for i in 0..stages {
            h = tape.conv1d(h, params[2 * i], Some(params[2 * i + 1]), self.stride, self.padding)?;
            h = tape.activation(h, ACT);
        }
        let (c, l) = self.bottleneck();
        let flat = tape.reshape(h, &[batch, c * l])?;
        tape.dense(flat, params[2 * stages], Some(params[2 * stages + 1]))
    }

    /// `z (B, N_z)` to `x (B, 3, nx)`; the last transposed convolution is the
    /// linear output head.
    pub fn decoder(&self, tape: &mut Tape, params: &[Var], z: Var) -> Result<Var, NnError> {
        let batch = tape.value(z).shape()[0];
        let lens = self.lengths().map_err(|e| NnError::Shape(e.to_string()))?;
        let (c, l) = self.bottleneck();
        let h = tape.dense(z, params[0], Some(params[1]))?;
        let h = tape.activation(h, ACT);
        let mut h = tape.reshape(h, &[batch, c, l])?;
        let stages = self.channels.len() - 1;
        for (j, i) in (0..stages).rev().enumerate() {
            h = tape.conv_transpose1d(h, params[2 + 2 * j], Some(params[3 + 2 * j]), self.stride, self.padding, lens[i])?;
            if i > 0 {
                h = tape.activation(h, ACT);
            }
        }
        Ok(h)
    }

    /// Latent forward operator `z0 -> z_f`.
    pub fn forward_operator(&self, tape: &mut Tape, params: &[Var], z: Var) -> Result<Var, NnError> {
        let batch = tape.value(z).shape()[0];
        let nz = self.latent_dim;
        let std = tape.value(params[1]).data().to_vec();
        let scale: Vec<f64> = std.iter().map(|s| 1.0 / s).collect();
        let shift: Vec<f64> = tape.value(params[0]).data().iter().zip(&std).map(|(m, s)| -m / s).collect();
        let h = tape.reshape(z, &[batch, nz, 1])?;
        let h = tape.channel_affine(h, &scale, &shift)?;
        let mut h = tape.reshape(h, &[batch, nz])?;
        let layers = &params[2..];
        let hidden = self.forward_hidden.len();
        for i in 0..hidden {
            h = tape.dense(h, layers[2 * i], Some(layers[2 * i + 1]))?;
            h = tape.activation(h, ACT);
        }
        let delta = tape.dense(h, layers[2 * hidden], Some(layers[2 * hidden + 1]))?;
        tape.add(z, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_lengths() {
        let a = Architecture::new(1000, 32);
        assert_eq!(a.lengths().unwrap(), vec![1000, 500, 250, 125, 63]);
        let d = Architecture::new(256, 32);
        assert_eq!(d.lengths().unwrap(), vec![256, 128, 64, 32, 16]);
        assert!(Architecture::new(64, 0).validate().is_err());
        assert!(Architecture { kernel: 4, ..Architecture::new(64, 4) }.validate().is_err());
        assert!(Architecture { channels: vec![2, 8], ..Architecture::new(64, 4) }.validate().is_err());
    }

    #[test]
    fn shapes_through_the_stack() {
        let a = Architecture::new(64, 8);
        let (enc, dec, fwd) = (a.init_encoder(1), a.init_decoder(2), a.init_forward(3));
        let mut t = Tape::new();
        let (ev, dv, fv) = (enc.register(&mut t, false), dec.register(&mut t, false), fwd.register(&mut t, false));
        let x = t.constant(Tensor::full(&[2, 3, 64], 0.3));
        let z = a.encoder(&mut t, &ev, x).unwrap();
        assert_eq!(t.value(z).shape(), &[2, 8]);
        let zf = a.forward_operator(&mut t, &fv, z).unwrap();
        // zero output layer: identity at initialization
        assert_eq!(t.value(zf).data(), t.value(z).data());
        let y = a.decoder(&mut t, &dv, zf).unwrap();
        assert_eq!(t.value(y).shape(), &[2, 3, 64]);
        assert!(t.value(y).all_finite());
    }
}
