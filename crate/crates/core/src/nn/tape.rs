//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards
//! visits every node after all of its consumers.

use serde::{Deserialize, Serialize};

use super::kernels::{col2im, gemm, im2col};
use super::{NnError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Gelu,
    Relu,
    Identity,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d { x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize },
    ConvTranspose1d { x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize },
    Dense { x: Var, w: Var, b: Option<Var> },
    Activation { x: Var, kind: Activation },
    Reshape { x: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, factor: f64 },
    ChannelAffine { x: Var, scale: Vec<f64> },
    Gather { x: Var, index: Vec<Option<usize>> },
    Sum { x: Var },
    Mse { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Computation record for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` did not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize), NnError> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        ref s => Err(NnError::Shape(format!("{what} must be rank 3, got {s:?}"))),
    }
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize), NnError> {
    match *t.shape() {
        [a, b] => Ok((a, b)),
        ref s => Err(NnError::Shape(format!("{what} must be rank 2, got {s:?}"))),
    }
}

/// Output length of a strided convolution.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Input or parameter. Gradients are only tracked when `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Cross-correlation of `x (B, C_in, L)` with `w (C_out, C_in, K)`, zero padding.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize) -> Result<Var, NnError> {
        let (batch, c_in, len) = dims3(self.value(x), "conv1d input")?;
        let (c_out, wc_in, kernel) = dims3(self.value(w), "conv1d weight")?;
        if wc_in != c_in {
            return Err(NnError::Shape(format!("conv1d channel axis: input has {c_in}, weight expects {wc_in}")));
        }
        if kernel % 2 == 0 {
            return Err(NnError::Shape(format!("conv1d kernel axis: kernel size {kernel} must be odd")));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [c_out] {
                return Err(NnError::Shape(format!("conv1d bias axis: expected [{c_out}], got {:?}", self.value(b).shape())));
            }
        }
        let out_len = conv_out_len(len, kernel, stride, padding)
            .ok_or_else(|| NnError::Shape(format!("conv1d length axis: input length {len} too short for kernel {kernel}")))?;

        let mut out = vec![0.0; batch * c_out * out_len];
        let mut cols = vec![0.0; c_in * kernel * out_len];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        for s in 0..batch {
            im2col(&xv[s * c_in * len..(s + 1) * c_in * len], c_in, len, kernel, stride, padding, out_len, &mut cols);
            gemm(c_out, c_in * kernel, out_len, 1.0, wv, false, &cols, false, 0.0, &mut out[s * c_out * out_len..(s + 1) * c_out * out_len]);
        }
        if let Some(b) = b {
            let bv = self.value(b).data();
            for (chunk, &bias) in out.chunks_exact_mut(out_len).zip(bv.iter().cycle()) {
                chunk.iter_mut().for_each(|v| *v += bias);
            }
        }
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(Tensor::new(vec![batch, c_out, out_len], out)?, Op::Conv1d { x, w, b, stride, padding }, needs))
    }

    /// Transposed convolution: `x (B, C_in, L_in)`, `w (C_in, C_out, K)`,
    /// producing `(B, C_out, out_len)`. This is the adjoint of [`Tape::conv1d`]
    /// mapping length `out_len` to `L_in` with the same stride and padding.
    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
        out_len: usize,
    ) -> Result<Var, NnError> {
        let (batch, c_in, len) = dims3(self.value(x), "conv_transpose1d input")?;
        let (wc_in, c_out, kernel) = dims3(self.value(w), "conv_transpose1d weight")?;
        if wc_in != c_in {
            return Err(NnError::Shape(format!("conv_transpose1d channel axis: input has {c_in}, weight expects {wc_in}")));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [c_out] {
                return Err(NnError::Shape(format!("conv_transpose1d bias axis: expected [{c_out}]")));
            }
        }
        if len == 0 || conv_out_len(out_len, kernel, stride, padding) != Some(len) {
            return Err(NnError::Shape(format!(
                "conv_transpose1d length axis: a length-{out_len} signal does not convolve to {len} with kernel {kernel}, stride {stride}, padding {padding}"
            )));
        }
        let mut out = vec![0.0; batch * c_out * out_len];
        let mut cols = vec![0.0; c_out * kernel * len];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        for s in 0..batch {
            // cols (C_out*K, L_in) = W^T (C_out*K, C_in) x (C_in, L_in)
            gemm(c_out * kernel, c_in, len, 1.0, wv, true, &xv[s * c_in * len..(s + 1) * c_in * len], false, 0.0, &mut cols);
            col2im(&cols, c_out, out_len, kernel, stride, padding, len, &mut out[s * c_out * out_len..(s + 1) * c_out * out_len]);
        }
        if let Some(b) = b {
            let bv = self.value(b).data();
            for (chunk, &bias) in out.chunks_exact_mut(out_len).zip(bv.iter().cycle()) {
                chunk.iter_mut().for_each(|v| *v += bias);
            }
        }
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(
            Tensor::new(vec![batch, c_out, out_len], out)?,
            Op::ConvTranspose1d { x, w, b, stride, padding },
            needs,
        ))
    }

    /// Affine map `x (B, n) -> x W^T + b` with `w (m, n)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NnError> {
        let (batch, n) = dims2(self.value(x), "dense input")?;
        let (m, wn) = dims2(self.value(w), "dense weight")?;
        if wn != n {
            return Err(NnError::Shape(format!("dense inner axis: input has {n}, weight expects {wn}")));
        }
        let mut out = vec![0.0; batch * m];
        gemm(batch, n, m, 1.0, self.value(x).data(), false, self.value(w).data(), true, 0.0, &mut out);
        if let Some(b) = b {
            let bv = self.value(b).data();
            if bv.len() != m {
                return Err(NnError::Shape(format!("dense bias axis: expected {m}, got {}", bv.len())));
            }
            for row in out.chunks_exact_mut(m) {
                row.iter_mut().zip(bv).for_each(|(v, b)| *v += b);
            }
        }
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(Tensor::new(vec![batch, m], out)?, Op::Dense { x, w, b }, needs))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        let v = self.value(x);
        let out: Vec<f64> = match kind {
            Activation::Identity => v.data().to_vec(),
            _ => v.data().iter().map(|&z| kind.apply(z)).collect(),
        };
        let shape = v.shape().to_vec();
        let needs = self.needs(x);
        self.push(Tensor::new(shape, out).expect("same shape"), Op::Activation { x, kind }, needs)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x).reshaped(shape)?;
        let needs = self.needs(x);
        Ok(self.push(t, Op::Reshape { x }, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NnError::Shape(format!("add: {:?} vs {:?}", va.shape(), vb.shape())));
        }
        let out = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let shape = va.shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::Add { a, b }, needs))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NnError::Shape(format!("mul: {:?} vs {:?}", va.shape(), vb.shape())));
        }
        let out = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let shape = va.shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::Mul { a, b }, needs))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let v = self.value(x);
        let out = v.data().iter().map(|z| z * factor).collect();
        let shape = v.shape().to_vec();
        let needs = self.needs(x);
        self.push(Tensor::new(shape, out).expect("same shape"), Op::Scale { x, factor }, needs)
    }

    /// `y[b, c, l] = x[b, c, l] * scale[c] + shift[c]` for `x (B, C, L)`.
    pub fn channel_affine(&mut self, x: Var, scale: &[f64], shift: &[f64]) -> Result<Var, NnError> {
        let (_, c, len) = dims3(self.value(x), "channel_affine input")?;
        if scale.len() != c || shift.len() != c {
            return Err(NnError::Shape(format!("channel_affine channel axis: {c} channels, {} scales", scale.len())));
        }
        let mut out = self.value(x).data().to_vec();
        for (i, chunk) in out.chunks_exact_mut(len).enumerate() {
            let ch = i % c;
            chunk.iter_mut().for_each(|v| *v = *v * scale[ch] + shift[ch]);
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs(x);
        Ok(self.push(Tensor::new(shape, out)?, Op::ChannelAffine { x, scale: scale.to_vec() }, needs))
    }

    /// `y[i] = x[index[i]]` (flat indices), or zero for `None`.
    pub fn gather(&mut self, x: Var, index: Vec<Option<usize>>, shape: &[usize]) -> Result<Var, NnError> {
        let src = self.value(x).data();
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= src.len()) {
            return Err(NnError::Shape(format!("gather index {bad} out of range for {} values", src.len())));
        }
        let out = index.iter().map(|i| i.map_or(0.0, |i| src[i])).collect();
        let t = Tensor::new(shape.to_vec(), out)?;
        let needs = self.needs(x);
        Ok(self.push(t, Op::Gather { x, index }, needs))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let needs = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, needs)
    }

    /// Mean of squared differences over every element.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NnError> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() {
            return Err(NnError::Shape(format!("mse: prediction {:?} vs target {:?}", p.shape(), t.shape())));
        }
        let n = p.len() as f64;
        let s = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        let needs = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::scalar(s), Op::Mse { pred, target }, needs))
    }

    /// Reverse sweep from the scalar `loss`. The tape may be swept once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(NnError::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        self.consumed = true;
        let seed = Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?;
        self.sweep(loss, seed)
    }

    /// Vector-Jacobian product seeded with `seed` at `output`.
    pub fn backward_with_seed(&mut self, output: Var, seed: Tensor) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        if seed.shape() != self.value(output).shape() {
            return Err(NnError::Shape(format!("seed {:?} vs output {:?}", seed.shape(), self.value(output).shape())));
        }
        self.consumed = true;
        self.sweep(output, seed)
    }

    fn sweep(&self, root: Var, seed: Tensor) -> Result<Gradients, NnError> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed);
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match *op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, stride, padding } => {
                let xv = self.value(x);
                let wv = self.value(w);
                let (batch, c_in, len) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let (c_out, kernel) = (wv.shape()[0], wv.shape()[2]);
                let out_len = out.shape()[2];
                let gd = g.data();
                let mut cols = vec![0.0; c_in * kernel * out_len];
                if self.needs(w) {
                    let mut gw = vec![0.0; wv.len()];
                    for s in 0..batch {
                        im2col(&xv.data()[s * c_in * len..(s + 1) * c_in * len], c_in, len, kernel, stride, padding, out_len, &mut cols);
                        // gW (C_out, C_in*K) += gY (C_out, L_out) cols^T
                        gemm(c_out, out_len, c_in * kernel, 1.0, &gd[s * c_out * out_len..], false, &cols, true, 1.0, &mut gw);
                    }
                    self.accumulate(grads, w, Tensor::new(wv.shape().to_vec(), gw).expect("shape"));
                }
                if self.needs(x) {
                    let mut gx = vec![0.0; xv.len()];
                    for s in 0..batch {
                        // gCols (C_in*K, L_out) = W^T gY
                        gemm(c_in * kernel, c_out, out_len, 1.0, wv.data(), true, &gd[s * c_out * out_len..], false, 0.0, &mut cols);
                        col2im(&cols, c_in, len, kernel, stride, padding, out_len, &mut gx[s * c_in * len..(s + 1) * c_in * len]);
                    }
                    self.accumulate(grads, x, Tensor::new(xv.shape().to_vec(), gx).expect("shape"));
                }
                if let Some(b) = b {
                    if self.needs(b) {
                        self.accumulate(grads, b, channel_sums(gd, batch, c_out, out_len));
                    }
                }
            }
            Op::ConvTranspose1d { x, w, b, stride, padding } => {
                let xv = self.value(x);
                let wv = self.value(w);
                let (batch, c_in, len) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let (c_out, kernel) = (wv.shape()[1], wv.shape()[2]);
                let out_len = out.shape()[2];
                let gd = g.data();
                let mut cols = vec![0.0; c_out * kernel * len];
                let mut gw = if self.needs(w) { Some(vec![0.0; wv.len()]) } else { None };
                let mut gx = if self.needs(x) { Some(vec![0.0; xv.len()]) } else { None };
                for s in 0..batch {
                    // cols (C_out*K, L_in)[co*K + k][i] = gY[co][i*stride + k - padding]
                    im2col(&gd[s * c_out * out_len..(s + 1) * c_out * out_len], c_out, out_len, kernel, stride, padding, len, &mut cols);
                    if let Some(gw) = gw.as_mut() {
                        // gW (C_in, C_out*K) += x (C_in, L_in) cols^T
                        gemm(c_in, len, c_out * kernel, 1.0, &xv.data()[s * c_in * len..], false, &cols, true, 1.0, gw);
                    }
                    if let Some(gx) = gx.as_mut() {
                        // gX (C_in, L_in) = W (C_in, C_out*K) cols
                        gemm(c_in, c_out * kernel, len, 1.0, wv.data(), false, &cols, false, 0.0, &mut gx[s * c_in * len..(s + 1) * c_in * len]);
                    }
                }
                if let Some(gw) = gw {
                    self.accumulate(grads, w, Tensor::new(wv.shape().to_vec(), gw).expect("shape"));
                }
                if let Some(gx) = gx {
                    self.accumulate(grads, x, Tensor::new(xv.shape().to_vec(), gx).expect("shape"));
                }
                if let Some(b) = b {
                    if self.needs(b) {
                        self.accumulate(grads, b, channel_sums(gd, batch, c_out, out_len));
                    }
                }
            }
            Op::Dense { x, w, b } => {
                let xv = self.value(x);
                let wv = self.value(w);
                let (batch, n) = (xv.shape()[0], xv.shape()[1]);
                let m = wv.shape()[0];
                let gd = g.data();
                if self.needs(x) {
                    let mut gx = vec![0.0; batch * n];
                    gemm(batch, m, n, 1.0, gd, false, wv.data(), false, 0.0, &mut gx);
                    self.accumulate(grads, x, Tensor::new(xv.shape().to_vec(), gx).expect("shape"));
                }
                if self.needs(w) {
                    let mut gw = vec![0.0; m * n];
                    gemm(m, batch, n, 1.0, gd, true, xv.data(), false, 0.0, &mut gw);
                    self.accumulate(grads, w, Tensor::new(wv.shape().to_vec(), gw).expect("shape"));
                }
                if let Some(b) = b {
                    if self.needs(b) {
                        let mut gb = vec![0.0; m];
                        for row in gd.chunks_exact(m) {
                            gb.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                        }
                        self.accumulate(grads, b, Tensor::from_vec(gb));
                    }
                }
            }
            Op::Activation { x, kind } => {
                let xv = self.value(x);
                let gx = match kind {
                    Activation::Identity => g.data().to_vec(),
                    _ => xv.data().iter().zip(g.data()).map(|(&z, &gy)| gy * kind.derivative(z)).collect(),
                };
                self.accumulate(grads, x, Tensor::new(xv.shape().to_vec(), gx).expect("shape"));
            }
            Op::Reshape { x } => {
                let shape = self.value(x).shape().to_vec();
                self.accumulate(grads, x, g.reshaped(&shape).expect("same size"));
            }
            Op::Add { a, b } => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.value(a), self.value(b));
                let ga = g.data().iter().zip(vb.data()).map(|(g, y)| g * y).collect();
                let gb = g.data().iter().zip(va.data()).map(|(g, x)| g * x).collect();
                self.accumulate(grads, a, Tensor::new(va.shape().to_vec(), ga).expect("shape"));
                self.accumulate(grads, b, Tensor::new(vb.shape().to_vec(), gb).expect("shape"));
            }
            Op::Scale { x, factor } => {
                let gx = g.data().iter().map(|v| v * factor).collect();
                self.accumulate(grads, x, Tensor::new(g.shape().to_vec(), gx).expect("shape"));
            }
            Op::ChannelAffine { x, ref scale } => {
                let shape = self.value(x).shape().to_vec();
                let (c, len) = (shape[1], shape[2]);
                let mut gx = g.data().to_vec();
                for (i, chunk) in gx.chunks_exact_mut(len).enumerate() {
                    let s = scale[i % c];
                    chunk.iter_mut().for_each(|v| *v *= s);
                }
                self.accumulate(grads, x, Tensor::new(shape, gx).expect("shape"));
            }
            Op::Gather { x, ref index } => {
                let xv = self.value(x);
                let mut gx = vec![0.0; xv.len()];
                for (gy, i) in g.data().iter().zip(index) {
                    if let Some(i) = i {
                        gx[*i] += gy;
                    }
                }
                self.accumulate(grads, x, Tensor::new(xv.shape().to_vec(), gx).expect("shape"));
            }
            Op::Sum { x } => {
                let shape = self.value(x).shape().to_vec();
                self.accumulate(grads, x, Tensor::full(&shape, g.data()[0]));
            }
            Op::Mse { pred, target } => {
                let (p, t) = (self.value(pred), self.value(target));
                let k = 2.0 * g.data()[0] / p.len() as f64;
                let diff: Vec<f64> = p.data().iter().zip(t.data()).map(|(a, b)| k * (a - b)).collect();
                if self.needs(target) {
                    let neg = diff.iter().map(|v| -v).collect();
                    self.accumulate(grads, target, Tensor::new(t.shape().to_vec(), neg).expect("shape"));
                }
                self.accumulate(grads, pred, Tensor::new(p.shape().to_vec(), diff).expect("shape"));
            }
        }
    }
}

fn channel_sums(g: &[f64], batch: usize, channels: usize, len: usize) -> Tensor {
    let mut out = vec![0.0; channels];
    for s in 0..batch {
        for c in 0..channels {
            let off = (s * channels + c) * len;
            out[c] += g[off..off + len].iter().sum::<f64>();
        }
    }
    Tensor::from_vec(out)
}
