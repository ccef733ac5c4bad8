//! Central finite-difference checks of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NnError, ParameterSet, Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct GradcheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Entries probed per parameter tensor (all entries when smaller).
    pub probes_per_tensor: usize,
    pub seed: u64,
    /// Denominator floor, absolute.
    pub abs_floor: f64,
    /// Denominator floor as a fraction of the largest analytic gradient entry.
    pub scale_floor: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, tolerance: 1e-5, probes_per_tensor: 8, seed: 0, abs_floor: 1e-8, scale_floor: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub worst_relative_error: f64,
    /// `(tensor, entry)` of the worst probe.
    pub worst_entry: (usize, usize),
    pub checked: usize,
    pub passed: bool,
}

fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the tape gradient of `loss` with respect to every tensor in
/// `params` against central differences on a random subset of entries.
pub fn gradcheck<F>(params: &ParameterSet, loss: F, opts: GradcheckOptions) -> Result<GradcheckReport, NnError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NnError>,
{
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, true);
    let out = loss(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<_> = vars.iter().map(|&v| grads.get(v)).collect();
    let scale = analytic.iter().flat_map(|g| g.data().iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = opts.abs_floor.max(opts.scale_floor * scale);

    let eval = |p: &ParameterSet| -> Result<f64, NnError> {
        let mut t = Tape::new();
        let vs = p.register(&mut t, false);
        let o = loss(&mut t, &vs)?;
        Ok(t.value(o).data()[0])
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = params.clone();
    let mut report = GradcheckReport { worst_relative_error: 0.0, worst_entry: (0, 0), checked: 0, passed: true };
    for (ti, tensor) in params.tensors().iter().enumerate() {
        let n = tensor.len();
        let picks: Vec<usize> = if n <= opts.probes_per_tensor {
            (0..n).collect()
        } else {
            sample(&mut rng, n, opts.probes_per_tensor).into_vec()
        };
        for j in picks {
            let orig = tensor.data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = orig + opts.step;
            let fp = eval(&probe)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig - opts.step;
            let fm = eval(&probe)?;
            probe.tensors_mut()[ti].data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * opts.step);
            let err = relative_error(analytic[ti].data()[j], numeric, floor);
            report.checked += 1;
            if err > report.worst_relative_error || err.is_nan() {
                report.worst_relative_error = err;
                report.worst_entry = (ti, j);
            }
        }
    }
    report.passed = report.worst_relative_error <= opts.tolerance;
    Ok(report)
}

/// Generic check of `grad` against central differences of `f` at `x`.
///
/// Returns the worst relative error over `indices`.
pub fn finite_difference_check<F>(x: &[f64], grad: &[f64], indices: &[usize], step: f64, floor: f64, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut worst = 0.0_f64;
    for &i in indices {
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        let numeric = (fp - fm) / (2.0 * step);
        let err = relative_error(grad[i], numeric, floor);
        if err > worst || err.is_nan() {
            worst = err;
        }
    }
    worst
}
