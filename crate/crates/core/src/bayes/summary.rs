use serde::{Deserialize, Serialize};

use super::BayesError;
use crate::euler1d::{build_initial_condition, Grid};
use crate::sampling::ParameterVector;

/// Pointwise posterior statistics of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
    pub rmse: f64,
    pub mean_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub x: Vec<f64>,
    pub rho: FieldSummary,
    pub p: FieldSummary,
}

/// Linear-interpolation percentile of sorted data, rank `q (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let r = q * (sorted.len() - 1) as f64;
    let lo = r.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (r - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics of `samples[s][j]` (draw `s`, location `j`) against `truth[j]`.
pub fn summarize_field(samples: &[Vec<f64>], truth: &[f64]) -> Result<FieldSummary, BayesError> {
    let ns = samples.len();
    if ns < 2 {
        return Err(BayesError::TooFewSamples(ns));
    }
    let nx = truth.len();
    if let Some(s) = samples.iter().find(|s| s.len() != nx) {
        return Err(BayesError::Config(format!("sample of length {} against {nx} locations", s.len())));
    }
    let mut out = FieldSummary {
        mean: vec![0.0; nx],
        std: vec![0.0; nx],
        lo95: vec![0.0; nx],
        hi95: vec![0.0; nx],
        rmse: 0.0,
        mean_std: 0.0,
    };
    let mut column = vec![0.0; ns];
    for j in 0..nx {
        for (c, s) in column.iter_mut().zip(samples) {
            *c = s[j];
        }
        let m = column.iter().sum::<f64>() / ns as f64;
        let var = column.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (ns - 1) as f64;
        column.sort_by(f64::total_cmp);
        out.mean[j] = m;
        out.std[j] = var.sqrt();
        out.lo95[j] = percentile_sorted(&column, 0.025);
        out.hi95[j] = percentile_sorted(&column, 0.975);
    }
    out.rmse = (out.mean.iter().zip(truth).map(|(m, t)| (m - t) * (m - t)).sum::<f64>() / nx as f64).sqrt();
    out.mean_std = out.std.iter().sum::<f64>() / nx as f64;
    Ok(out)
}

/// Summaries of the initial density and pressure fields implied by `draws`.
pub fn posterior_summary(draws: &[ParameterVector], truth: &ParameterVector, grid: &Grid) -> Result<PosteriorSummary, BayesError> {
    if draws.len() < 2 {
        return Err(BayesError::TooFewSamples(draws.len()));
    }
    let mut rho = Vec::with_capacity(draws.len());
    let mut p = Vec::with_capacity(draws.len());
    for d in draws {
        let f = build_initial_condition(d, grid)?;
        rho.push(f.rho);
        p.push(f.p);
    }
    let t = build_initial_condition(truth, grid)?;
    Ok(PosteriorSummary {
        x: (0..grid.nx).map(|i| grid.cell_center(i)).collect(),
        rho: summarize_field(&rho, &t.rho)?,
        p: summarize_field(&p, &t.p)?,
    })
}

impl PosteriorSummary {
    /// CSV with columns `x,mean,std,lo95,hi95` for one variable.
    pub fn field_csv(&self, field: &FieldSummary) -> String {
        let mut s = String::from("x,mean,std,lo95,hi95\n");
        for j in 0..self.x.len() {
            s.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", self.x[j], field.mean[j], field.std[j], field.lo95[j], field.hi95[j]));
        }
        s
    }
}
