use serde::{Deserialize, Serialize};

use super::SolverError;

/// Ideal-gas closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    pub gamma: f64,
}

impl GasModel {
    pub fn new(gamma: f64) -> Result<Self, SolverError> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(SolverError::Config(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    /// Total energy per unit volume.
    #[inline]
    pub fn total_energy(&self, rho: f64, u: f64, p: f64) -> f64 {
        p / (self.gamma - 1.0) + 0.5 * rho * u * u
    }

    #[inline]
    pub fn sound_speed(&self, rho: f64, p: f64) -> f64 {
        (self.gamma * p / rho).sqrt()
    }
}

impl Default for GasModel {
    fn default() -> Self {
        Self { gamma: 1.4 }
    }
}

/// Uniform cell-centred grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Grid {
    /// Smallest grid on which every WENO5 stencil (plus ghosts) fits.
    pub const MIN_CELLS: usize = 11;

    pub fn new(nx: usize, x_min: f64, x_max: f64) -> Result<Self, SolverError> {
        if nx < Self::MIN_CELLS {
            return Err(SolverError::Config(format!(
                "grid needs at least {} cells, got {nx}",
                Self::MIN_CELLS
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(SolverError::Config(format!(
                "invalid domain [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { nx, x_min, x_max })
    }

    /// `nx` cells on the unit interval.
    pub fn unit(nx: usize) -> Result<Self, SolverError> {
        Self::new(nx, 0.0, 1.0)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.cell_center(i)).collect()
    }
}

/// Single-cell primitive state `(rho, u, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl Primitive {
    pub const fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p }
    }

    pub fn is_physical(&self) -> bool {
        self.rho > 0.0 && self.p > 0.0 && self.u.is_finite() && self.rho.is_finite() && self.p.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveField {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl PrimitiveField {
    pub fn uniform(nx: usize, state: Primitive) -> Self {
        Self {
            rho: vec![state.rho; nx],
            u: vec![state.u; nx],
            p: vec![state.p; nx],
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn cell(&self, i: usize) -> Primitive {
        Primitive::new(self.rho[i], self.u[i], self.p[i])
    }

    /// Channels in `rho, u, p` order.
    pub fn channels(&self) -> [&[f64]; 3] {
        [&self.rho, &self.u, &self.p]
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.rho.len();
        if self.u.len() != n || self.p.len() != n {
            return Err(SolverError::Shape(format!(
                "channel lengths differ: rho {}, u {}, p {}",
                n,
                self.u.len(),
                self.p.len()
            )));
        }
        for i in 0..n {
            if !self.cell(i).is_physical() {
                return Err(SolverError::InvalidState {
                    cell: i,
                    detail: format!("rho = {}, u = {}, p = {}", self.rho[i], self.u[i], self.p[i]),
                });
            }
        }
        Ok(())
    }

    /// Flattened `(3, nx)` row-major layout.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.len());
        out.extend_from_slice(&self.rho);
        out.extend_from_slice(&self.u);
        out.extend_from_slice(&self.p);
        out
    }

    pub fn from_flat(data: &[f64]) -> Result<Self, SolverError> {
        if data.len() % 3 != 0 {
            return Err(SolverError::Shape(format!(
                "flat field length {} is not a multiple of 3",
                data.len()
            )));
        }
        let n = data.len() / 3;
        Ok(Self {
            rho: data[..n].to_vec(),
            u: data[n..2 * n].to_vec(),
            p: data[2 * n..].to_vec(),
        })
    }
}

/// Conserved variables `(rho, rho u, E)` per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservedField {
    pub rho: Vec<f64>,
    pub mom: Vec<f64>,
    pub energy: Vec<f64>,
}

impl ConservedField {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn zeros(nx: usize) -> Self {
        Self {
            rho: vec![0.0; nx],
            mom: vec![0.0; nx],
            energy: vec![0.0; nx],
        }
    }
}

pub fn primitive_to_conserved(
    field: &PrimitiveField,
    gas: &GasModel,
) -> Result<ConservedField, SolverError> {
    field.validate()?;
    let n = field.len();
    let mut out = ConservedField::zeros(n);
    for i in 0..n {
        let (rho, u, p) = (field.rho[i], field.u[i], field.p[i]);
        out.rho[i] = rho;
        out.mom[i] = rho * u;
        out.energy[i] = gas.total_energy(rho, u, p);
    }
    Ok(out)
}

#[inline]
pub(crate) fn cell_to_primitive(rho: f64, mom: f64, energy: f64, gas: &GasModel) -> Primitive {
    let u = mom / rho;
    let p = (gas.gamma - 1.0) * (energy - 0.5 * mom * u);
    Primitive::new(rho, u, p)
}

pub fn conserved_to_primitive(
    field: &ConservedField,
    gas: &GasModel,
) -> Result<PrimitiveField, SolverError> {
    let n = field.len();
    if field.mom.len() != n || field.energy.len() != n {
        return Err(SolverError::Shape("conserved channel lengths differ".into()));
    }
    let mut out = PrimitiveField::uniform(n, Primitive::new(0.0, 0.0, 0.0));
    for i in 0..n {
        let s = cell_to_primitive(field.rho[i], field.mom[i], field.energy[i], gas);
        if !s.is_physical() {
            return Err(SolverError::InvalidState {
                cell: i,
                detail: format!(
                    "rho = {}, derived p = {} (rho u = {}, E = {})",
                    s.rho, s.p, field.mom[i], field.energy[i]
                ),
            });
        }
        out.rho[i] = s.rho;
        out.u[i] = s.u;
        out.p[i] = s.p;
    }
    Ok(out)
}

/// Physical flux `[rho u, rho u^2 + p, u (E + p)]`.
#[inline]
pub fn euler_flux(state: Primitive, gas: &GasModel) -> [f64; 3] {
    let Primitive { rho, u, p } = state;
    let e = gas.total_energy(rho, u, p);
    [rho * u, rho * u * u + p, u * (e + p)]
}
