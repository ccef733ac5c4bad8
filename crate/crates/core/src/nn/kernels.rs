//! GEMM-backed building blocks for the convolution and dense ops.

/// `c = alpha * op(a) * op(b) + beta * c` for row-major operands.
///
/// `a` is `m x k` (or `k x m` when `ta`), `b` is `k x n` (or `n x k` when `tb`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides describe matrices that lie within the slices checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds `x` of shape `(channels, len)` into `(channels * kernel, out_len)`
/// with `cols[c * kernel + k][o] = x[c][o * stride + k - padding]` (zero outside).
pub(crate) fn im2col(
    x: &[f64],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
    cols: &mut [f64],
) {
    for c in 0..channels {
        let row_in = &x[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &mut cols[(c * kernel + k) * out_len..(c * kernel + k + 1) * out_len];
            for (o, slot) in row.iter_mut().enumerate() {
                let pos = (o * stride + k) as isize - padding as isize;
                *slot = if pos >= 0 && (pos as usize) < len { row_in[pos as usize] } else { 0.0 };
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `cols` back into `x`.
pub(crate) fn col2im(
    cols: &[f64],
    channels: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
    x: &mut [f64],
) {
    for c in 0..channels {
        let row_out = &mut x[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &cols[(c * kernel + k) * out_len..(c * kernel + k + 1) * out_len];
            for (o, v) in row.iter().enumerate() {
                let pos = (o * stride + k) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < len {
                    row_out[pos as usize] += v;
                }
            }
        }
    }
}
