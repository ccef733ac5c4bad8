//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function has a plain Rust counterpart returning
//! `Result<_, String>` so the numerics can be tested natively.

use sodbayes::euler1d::{exact_riemann, solve_theta, Grid, Primitive, RiemannStates, SolverConfig, DIAPHRAGM};
use sodbayes::sampling::{lhs_sample, ParameterRanges, ParameterVector};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request.
pub const MAX_NX: usize = 2000;
/// Largest Latin hypercube design the page may request.
pub const MAX_SAMPLES: usize = 10_000;

fn theta(rho_l: f64, p_l: f64, rho_r: f64, p_r: f64) -> Result<ParameterVector, String> {
    let t = ParameterVector::new(rho_l, p_l, rho_r, p_r);
    if !t.is_positive() {
        return Err("densities and pressures must be positive".into());
    }
    Ok(t)
}

/// Solves the tube to `t = 0.2` and samples the exact solution on the same
/// cell centres. Layout: `[x, rho, u, p, rho_exact, u_exact, p_exact]`,
/// each of length `nx`.
pub fn simulate_fields(rho_l: f64, p_l: f64, rho_r: f64, p_r: f64, nx: usize) -> Result<Vec<f64>, String> {
    if nx > MAX_NX {
        return Err(format!("nx = {nx} exceeds {MAX_NX}"));
    }
    let t = theta(rho_l, p_l, rho_r, p_r)?;
    let grid = Grid::unit(nx).map_err(|e| e.to_string())?;
    let config = SolverConfig::default();
    let field = solve_theta(&t, &grid, &config).map_err(|e| e.to_string())?;
    let x = grid.cell_centers();
    let xis: Vec<f64> = x.iter().map(|&xc| (xc - DIAPHRAGM) / config.t_final).collect();
    let exact = exact_riemann(&states(t), &config.gas, &xis).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(7 * nx);
    out.extend_from_slice(&x);
    out.extend_from_slice(&field.rho);
    out.extend_from_slice(&field.u);
    out.extend_from_slice(&field.p);
    out.extend(exact.iter().map(|s| s.rho));
    out.extend(exact.iter().map(|s| s.u));
    out.extend(exact.iter().map(|s| s.p));
    Ok(out)
}

fn states(t: ParameterVector) -> RiemannStates {
    RiemannStates {
        left: Primitive { rho: t.rho_l, u: 0.0, p: t.p_l },
        right: Primitive { rho: t.rho_r, u: 0.0, p: t.p_r },
    }
}

/// Star-region `[p*, u*]`.
pub fn star_values(rho_l: f64, p_l: f64, rho_r: f64, p_r: f64) -> Result<Vec<f64>, String> {
    let t = theta(rho_l, p_l, rho_r, p_r)?;
    let star = sodbayes::euler1d::star_state(&states(t), &Default::default()).map_err(|e| e.to_string())?;
    Ok(vec![star.p, star.u])
}

/// Design over the training ranges, flattened row-major as `n x 4`.
pub fn design(n: usize, seed: u64) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_SAMPLES {
        return Err(format!("sample count must be in 1..={MAX_SAMPLES}"));
    }
    Ok(lhs_sample(n, &ParameterRanges::default(), seed).into_iter().flat_map(|t| t.to_array()).collect())
}

#[wasm_bindgen]
pub fn simulate(rho_l: f64, p_l: f64, rho_r: f64, p_r: f64, nx: usize) -> Result<Vec<f64>, JsValue> {
    simulate_fields(rho_l, p_l, rho_r, p_r, nx).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn star_state(rho_l: f64, p_l: f64, rho_r: f64, p_r: f64) -> Result<Vec<f64>, JsValue> {
    star_values(rho_l, p_l, rho_r, p_r).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn latin_hypercube(n: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    design(n, seed).map_err(|e| JsValue::from_str(&e))
}
