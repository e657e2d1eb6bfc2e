//! Numerical tolerances. The scheme constant was fitted once on the Gaussian
//! fixture and is frozen here; see the README for the calibration run.

use crate::grid::SpaceTimeGrid;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Complementarity tolerance per unit of `Δx + Δt`.
    pub c_scheme: f64,
    /// Multiple of the scheme tolerance below which a node counts as stopped.
    pub barrier_factor: f64,
    /// Limit-surface PDE residual per unit of `Δx + Δt + |π|`.
    pub c_pde: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { c_scheme: 1e-6, barrier_factor: 2.0, c_pde: 0.25 }
    }
}

impl Tolerances {
    pub fn scheme(&self, grid: &SpaceTimeGrid) -> f64 {
        self.c_scheme * (grid.dx + grid.dt)
    }

    pub fn barrier(&self, grid: &SpaceTimeGrid) -> f64 {
        self.barrier_factor * self.scheme(grid)
    }

    pub fn pde(&self, grid: &SpaceTimeGrid, mesh: f64) -> f64 {
        self.c_pde * (grid.dx + grid.dt + mesh)
    }
}
