use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::BayesError;
use crate::euler1d::{solve_theta, Grid, PrimitiveField, SolverConfig};
use crate::sampling::ParameterVector;

/// Sensor window `[0.1, 0.9]`.
pub const OBS_WINDOW: (f64, f64) = (0.1, 0.9);
pub const DEFAULT_SIGMA: f64 = 0.05;

/// Sensor layout and noise level. Density and pressure are observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub n_obs: usize,
    pub locations: Vec<f64>,
    /// Index of the cell sampled at each location.
    pub cells: Vec<usize>,
    pub sigma: f64,
}

/// `n_obs` equally spaced points over the sensor window, both ends included.
pub fn make_observation_locations(n_obs: usize) -> Result<Vec<f64>, BayesError> {
    if n_obs < 2 {
        return Err(BayesError::Config(format!("need at least 2 observation locations, got {n_obs}")));
    }
    let (a, b) = OBS_WINDOW;
    let h = (b - a) / (n_obs - 1) as f64;
    Ok((0..n_obs).map(|i| if i == n_obs - 1 { b } else { a + i as f64 * h }).collect())
}

/// Nearest cell centre to `x`; ties go to the lower index.
fn nearest_cell(grid: &Grid, x: f64) -> Result<usize, BayesError> {
    if !(x >= grid.x_min && x <= grid.x_max) {
        return Err(BayesError::Config(format!("location {x} outside the grid [{}, {}]", grid.x_min, grid.x_max)));
    }
    let s = (x - grid.x_min) / grid.dx() - 0.5;
    let lo = (s.floor().max(0.0) as usize).min(grid.nx - 1);
    let hi = (lo + 1).min(grid.nx - 1);
    let (dl, dh) = ((grid.cell_center(lo) - x).abs(), (grid.cell_center(hi) - x).abs());
    // distances within roundoff count as a tie
    Ok(if dh < dl - 1e-9 * grid.dx() { hi } else { lo })
}

impl ObservationConfig {
    pub fn new(n_obs: usize, sigma: f64, grid: &Grid) -> Result<Self, BayesError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(BayesError::Config(format!("sigma must be positive, got {sigma}")));
        }
        let locations = make_observation_locations(n_obs)?;
        let cells = locations.iter().map(|&x| nearest_cell(grid, x)).collect::<Result<_, _>>()?;
        Ok(Self { n_obs, locations, cells, sigma })
    }

    /// `N_y = 2 n_obs`.
    pub fn len(&self) -> usize {
        2 * self.n_obs
    }

    pub fn is_empty(&self) -> bool {
        self.n_obs == 0
    }

    /// Flat indices into a `(3, nx)` field for the observation vector.
    pub fn flat_indices(&self, nx: usize) -> Vec<usize> {
        self.cells.iter().copied().chain(self.cells.iter().map(|c| 2 * nx + c)).collect()
    }
}

/// `[rho at each location, then p at each location]`.
pub fn observe(field: &PrimitiveField, config: &ObservationConfig) -> Result<Vec<f64>, BayesError> {
    if let Some(&c) = config.cells.iter().find(|&&c| c >= field.len()) {
        return Err(BayesError::Config(format!("observation cell {c} outside a field of {} cells", field.len())));
    }
    Ok(config.cells.iter().map(|&c| field.rho[c]).chain(config.cells.iter().map(|&c| field.p[c])).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub config: ObservationConfig,
    pub y_obs: Vec<f64>,
    pub truth_theta: Option<ParameterVector>,
    pub noise_seed: u64,
}

impl ObservationSet {
    /// CSV with columns `x,cell,rho_obs,p_obs`.
    pub fn to_csv(&self) -> String {
        let n = self.config.n_obs;
        let mut s = String::from("x,cell,rho_obs,p_obs\n");
        for i in 0..n {
            s.push_str(&format!("{},{},{:e},{:e}\n", self.config.locations[i], self.config.cells[i], self.y_obs[i], self.y_obs[n + i]));
        }
        s
    }
}

/// Noisy measurements of the high-fidelity final state for `theta_true`.
pub fn synthesize_observations(
    theta_true: &ParameterVector,
    config: &ObservationConfig,
    grid: &Grid,
    solver: &SolverConfig,
    seed: u64,
) -> Result<ObservationSet, BayesError> {
    let field = solve_theta(theta_true, grid, solver)?;
    let mut y = observe(&field, config)?;
    let noise = Normal::new(0.0, config.sigma).map_err(|e| BayesError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut y {
        *v += noise.sample(&mut rng);
    }
    Ok(ObservationSet { config: config.clone(), y_obs: y, truth_theta: Some(*theta_true), noise_seed: seed })
}
