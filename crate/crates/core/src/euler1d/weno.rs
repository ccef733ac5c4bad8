use super::SolverError;

/// Smoothness-indicator regularizer.
pub const WENO_EPS: f64 = 1e-6;

const LINEAR_WEIGHTS: [f64; 3] = [0.1, 0.6, 0.3];

/// Jiang-Shu WENO5 value at the right face of the centre cell of `v`.
///
/// `v` holds cell averages `[v_{i-2}, .., v_{i+2}]`. Mirror the stencil to
/// obtain the value at the left face.
#[inline]
pub(crate) fn weno5(v: [f64; 5], eps: f64) -> f64 {
    let [a, b, c, d, e] = v;
    let q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0;
    let q1 = (-b + 5.0 * c + 2.0 * d) / 6.0;
    let q2 = (2.0 * c + 5.0 * d - e) / 6.0;

    let b0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let b1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let b2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);

    let a0 = LINEAR_WEIGHTS[0] / (eps + b0).powi(2);
    let a1 = LINEAR_WEIGHTS[1] / (eps + b1).powi(2);
    let a2 = LINEAR_WEIGHTS[2] / (eps + b2).powi(2);
    (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)
}

/// Nonlinear weights for the three candidate stencils; exposed for tests.
#[cfg(test)]
pub(crate) fn weno5_weights(v: [f64; 5], eps: f64) -> [f64; 3] {
    let [a, b, c, d, e] = v;
    let b0 = 13.0 / 12.0 * (a - 2.0 * b + c).powi(2) + 0.25 * (a - 4.0 * b + 3.0 * c).powi(2);
    let b1 = 13.0 / 12.0 * (b - 2.0 * c + d).powi(2) + 0.25 * (b - d).powi(2);
    let b2 = 13.0 / 12.0 * (c - 2.0 * d + e).powi(2) + 0.25 * (3.0 * c - 4.0 * d + e).powi(2);
    let alpha = [
        LINEAR_WEIGHTS[0] / (eps + b0).powi(2),
        LINEAR_WEIGHTS[1] / (eps + b1).powi(2),
        LINEAR_WEIGHTS[2] / (eps + b2).powi(2),
    ];
    let s: f64 = alpha.iter().sum();
    [alpha[0] / s, alpha[1] / s, alpha[2] / s]
}

/// Checked WENO5 reconstruction with the default regularizer.
pub fn weno5_reconstruct(stencil: [f64; 5]) -> Result<f64, SolverError> {
    if stencil.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite);
    }
    Ok(weno5(stencil, WENO_EPS))
}
