use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ParameterRanges, ParameterVector};

/// Latin hypercube design: in every dimension each of the `n` equal-width
/// strata holds exactly one sample.
pub fn lhs_sample(n: usize, ranges: &ParameterRanges, seed: u64) -> Vec<ParameterVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (dim, col) in columns.iter_mut().enumerate() {
        let (lo, hi) = ranges.bounds[dim];
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (slot, &s) in col.iter_mut().zip(&strata) {
            let jitter: f64 = rng.random();
            *slot = lo + (s as f64 + jitter) / n as f64 * (hi - lo);
        }
    }
    (0..n)
        .map(|i| ParameterVector::new(columns[0][i], columns[1][i], columns[2][i], columns[3][i]))
        .collect()
}
