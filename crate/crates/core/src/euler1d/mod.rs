//! High-fidelity finite-volume solver for the 1D Euler equations.
//!
//! Spatial reconstruction is componentwise fifth-order WENO on primitive
//! variables, interface fluxes come from an HLLC Riemann solver, and time
//! integration is the three-stage SSP Runge-Kutta scheme. An exact Riemann
//! solver is included to verify the scheme on shock-tube problems.

mod exact;
mod hllc;
mod solver;
mod state;
mod weno;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{exact_riemann, right_shock_speed, sample_exact, star_state, RiemannStates, StarState};
pub use hllc::hllc_flux;
pub use solver::{build_initial_condition, compute_dt, rk3_step, solve, solve_theta, DIAPHRAGM};
pub use state::{
    conserved_to_primitive, euler_flux, primitive_to_conserved, ConservedField, GasModel, Grid,
    Primitive, PrimitiveField,
};
pub use weno::{weno5_reconstruct, WENO_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid state at cell {cell}: {detail}")]
    InvalidState { cell: usize, detail: String },
    #[error("stage {stage} of the RK3 update produced an invalid state at cell {cell}: {detail}")]
    StageFailure { stage: usize, cell: usize, detail: String },
    #[error("solver blew up at t = {time}, cell {cell}: {detail}")]
    Blowup { time: f64, cell: usize, detail: String },
    #[error("non-finite value in reconstruction stencil")]
    NonFinite,
    #[error("vacuum is generated by the Riemann problem (critical velocity {critical} <= {du})")]
    Vacuum { critical: f64, du: f64 },
    #[error("HLLC wave-speed estimate is not finite")]
    WaveSpeed,
    #[error("invalid parameter vector: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero-gradient ghost cells.
    #[default]
    Transmissive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub gas: GasModel,
    pub cfl: f64,
    pub t_final: f64,
    pub weno_eps: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gas: GasModel::default(),
            cfl: 0.5,
            t_final: 0.2,
            weno_eps: WENO_EPS,
            boundary: Boundary::Transmissive,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        GasModel::new(self.gas.gamma)?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(SolverError::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if !(self.weno_eps > 0.0) {
            return Err(SolverError::Config(format!("weno_eps must be positive, got {}", self.weno_eps)));
        }
        Ok(())
    }
}
