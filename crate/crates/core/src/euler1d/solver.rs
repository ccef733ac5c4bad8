use super::state::{cell_to_primitive, primitive_to_conserved, ConservedField, GasModel, Grid, Primitive, PrimitiveField};
use super::weno::weno5;
use super::{hllc::hllc_flux, SolverConfig, SolverError};
use crate::sampling::ParameterVector;

/// Diaphragm location; cells with centre `<= DIAPHRAGM` take the left state.
pub const DIAPHRAGM: f64 = 0.5;

const GHOSTS: usize = 3;

/// Piecewise-constant, velocity-free initial condition for `theta`.
pub fn build_initial_condition(theta: &ParameterVector, grid: &Grid) -> Result<PrimitiveField, SolverError> {
    if !theta.is_positive() {
        return Err(SolverError::Domain(format!("all components must be positive, got {theta:?}")));
    }
    let mut f = PrimitiveField::uniform(grid.nx, Primitive::new(theta.rho_r, 0.0, theta.p_r));
    for i in 0..grid.nx {
        if grid.cell_center(i) <= DIAPHRAGM {
            f.rho[i] = theta.rho_l;
            f.p[i] = theta.p_l;
        }
    }
    Ok(f)
}

/// CFL-limited time step, clipped so the march lands on `remaining`.
pub fn compute_dt(field: &PrimitiveField, grid: &Grid, config: &SolverConfig, remaining: f64) -> f64 {
    let gas = &config.gas;
    let max_speed = (0..field.len())
        .map(|i| field.u[i].abs() + gas.sound_speed(field.rho[i], field.p[i]))
        .fold(0.0_f64, f64::max);
    let dt = config.cfl * grid.dx() / max_speed;
    dt.min(remaining)
}

fn max_wave_speed(field: &ConservedField, gas: &GasModel) -> f64 {
    (0..field.len())
        .map(|i| {
            let s = cell_to_primitive(field.rho[i], field.mom[i], field.energy[i], gas);
            s.u.abs() + gas.sound_speed(s.rho, s.p)
        })
        .fold(0.0_f64, f64::max)
}

/// Scratch buffers for one residual evaluation.
struct Workspace {
    rho: Vec<f64>,
    u: Vec<f64>,
    p: Vec<f64>,
    flux: Vec<[f64; 3]>,
}

impl Workspace {
    fn new(nx: usize) -> Self {
        let n = nx + 2 * GHOSTS;
        Self {
            rho: vec![0.0; n],
            u: vec![0.0; n],
            p: vec![0.0; n],
            flux: vec![[0.0; 3]; nx + 1],
        }
    }

    /// Loads cells and fills transmissive ghosts. Returns the first unphysical cell.
    fn load(&mut self, field: &ConservedField, gas: &GasModel) -> Result<(), (usize, Primitive)> {
        let nx = field.len();
        for i in 0..nx {
            let s = cell_to_primitive(field.rho[i], field.mom[i], field.energy[i], gas);
            if !s.is_physical() {
                return Err((i, s));
            }
            self.rho[i + GHOSTS] = s.rho;
            self.u[i + GHOSTS] = s.u;
            self.p[i + GHOSTS] = s.p;
        }
        for g in 0..GHOSTS {
            self.rho[g] = self.rho[GHOSTS];
            self.u[g] = self.u[GHOSTS];
            self.p[g] = self.p[GHOSTS];
            let (dst, src) = (nx + GHOSTS + g, nx + GHOSTS - 1);
            self.rho[dst] = self.rho[src];
            self.u[dst] = self.u[src];
            self.p[dst] = self.p[src];
        }
        Ok(())
    }

    /// Interface fluxes for all `nx + 1` faces.
    fn fluxes(&mut self, nx: usize, config: &SolverConfig) -> Result<(), (usize, SolverError)> {
        let eps = config.weno_eps;
        let gas = &config.gas;
        for f in 0..=nx {
            // face between extended cells k and k + 1
            let k = f + GHOSTS - 1;
            let left_of = |v: &[f64]| weno5([v[k - 2], v[k - 1], v[k], v[k + 1], v[k + 2]], eps);
            let right_of = |v: &[f64]| weno5([v[k + 3], v[k + 2], v[k + 1], v[k], v[k - 1]], eps);
            let mut wl = Primitive::new(left_of(&self.rho), left_of(&self.u), left_of(&self.p));
            let mut wr = Primitive::new(right_of(&self.rho), right_of(&self.u), right_of(&self.p));
            // Fall back to first order where the high-order face state is unphysical.
            if !wl.is_physical() {
                wl = Primitive::new(self.rho[k], self.u[k], self.p[k]);
            }
            if !wr.is_physical() {
                wr = Primitive::new(self.rho[k + 1], self.u[k + 1], self.p[k + 1]);
            }
            self.flux[f] = hllc_flux(wl, wr, gas).map_err(|e| (f.min(nx - 1), e))?;
        }
        Ok(())
    }
}

/// `dt` times the semi-discrete right-hand side added to `base`.
fn euler_update(
    ws: &mut Workspace,
    state: &ConservedField,
    dt: f64,
    dx: f64,
    config: &SolverConfig,
    stage: usize,
) -> Result<ConservedField, SolverError> {
    let nx = state.len();
    ws.load(state, &config.gas).map_err(|(cell, s)| SolverError::StageFailure {
        stage,
        cell,
        detail: format!("rho = {}, p = {}", s.rho, s.p),
    })?;
    ws.fluxes(nx, config).map_err(|(cell, e)| SolverError::StageFailure {
        stage,
        cell,
        detail: e.to_string(),
    })?;
    let r = dt / dx;
    let mut out = state.clone();
    for i in 0..nx {
        let (fl, fr) = (ws.flux[i], ws.flux[i + 1]);
        out.rho[i] -= r * (fr[0] - fl[0]);
        out.mom[i] -= r * (fr[1] - fl[1]);
        out.energy[i] -= r * (fr[2] - fl[2]);
    }
    Ok(out)
}

fn blend(a: &ConservedField, wa: f64, b: &ConservedField, wb: f64) -> ConservedField {
    let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(x, y)| wa * x + wb * y).collect();
    ConservedField { rho: mix(&a.rho, &b.rho), mom: mix(&a.mom, &b.mom), energy: mix(&a.energy, &b.energy) }
}

fn check_stage(field: &ConservedField, gas: &GasModel, stage: usize) -> Result<(), SolverError> {
    for i in 0..field.len() {
        let s = cell_to_primitive(field.rho[i], field.mom[i], field.energy[i], gas);
        if !s.is_physical() {
            return Err(SolverError::StageFailure { stage, cell: i, detail: format!("rho = {}, p = {}", s.rho, s.p) });
        }
    }
    Ok(())
}

/// One Shu-Osher SSP-RK3 step.
pub fn rk3_step(field: &ConservedField, dt: f64, grid: &Grid, config: &SolverConfig) -> Result<ConservedField, SolverError> {
    let mut ws = Workspace::new(grid.nx);
    rk3_step_with(&mut ws, field, dt, grid, config)
}

fn rk3_step_with(
    ws: &mut Workspace,
    field: &ConservedField,
    dt: f64,
    grid: &Grid,
    config: &SolverConfig,
) -> Result<ConservedField, SolverError> {
    if field.len() != grid.nx {
        return Err(SolverError::Shape(format!("field has {} cells, grid has {}", field.len(), grid.nx)));
    }
    let dx = grid.dx();
    let u1 = euler_update(ws, field, dt, dx, config, 1)?;
    let u2 = blend(field, 0.75, &euler_update(ws, &u1, dt, dx, config, 2)?, 0.25);
    let u3 = blend(field, 1.0 / 3.0, &euler_update(ws, &u2, dt, dx, config, 3)?, 2.0 / 3.0);
    check_stage(&u3, &config.gas, 3)?;
    Ok(u3)
}

/// Marches `initial` to `config.t_final`.
pub fn solve(initial: &PrimitiveField, grid: &Grid, config: &SolverConfig) -> Result<PrimitiveField, SolverError> {
    config.validate()?;
    if initial.len() != grid.nx {
        return Err(SolverError::Shape(format!("field has {} cells, grid has {}", initial.len(), grid.nx)));
    }
    let mut state = primitive_to_conserved(initial, &config.gas)?;
    let mut ws = Workspace::new(grid.nx);
    let mut t = 0.0;
    while t < config.t_final {
        let remaining = config.t_final - t;
        let dt = (config.cfl * grid.dx() / max_wave_speed(&state, &config.gas)).min(remaining);
        state = rk3_step_with(&mut ws, &state, dt, grid, config).map_err(|e| match e {
            SolverError::StageFailure { cell, detail, stage } => SolverError::Blowup {
                time: t,
                cell,
                detail: format!("stage {stage}: {detail}"),
            },
            other => other,
        })?;
        t = if dt == remaining { config.t_final } else { t + dt };
    }
    let mut out = PrimitiveField::uniform(grid.nx, Primitive::new(0.0, 0.0, 0.0));
    for i in 0..grid.nx {
        let s = cell_to_primitive(state.rho[i], state.mom[i], state.energy[i], &config.gas);
        out.rho[i] = s.rho;
        out.u[i] = s.u;
        out.p[i] = s.p;
    }
    Ok(out)
}

/// `X_f(theta)`: the high-fidelity forward map.
pub fn solve_theta(theta: &ParameterVector, grid: &Grid, config: &SolverConfig) -> Result<PrimitiveField, SolverError> {
    solve(&build_initial_condition(theta, grid)?, grid, config)
}
