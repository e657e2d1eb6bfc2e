//! Discrete Root barriers read off the stopping traces of a solved surface.

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::layers::ValueSurface;
use serde::Serialize;

/// Largest tolerated share of region nodes that un-stop after first stopping.
pub const MAX_FLAGGED_FRACTION: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct LayerBarrier {
    pub s: f64,
    /// First stopped time index per x-node; `None` means beyond the horizon.
    first: Vec<Option<usize>>,
    /// Nodes after a first stop whose gap exceeded the threshold again.
    pub flagged: u64,
    /// Stopped nodes after enforcing the right-barrier shape.
    pub region: u64,
}

impl LayerBarrier {
    pub fn first_index(&self, i: usize) -> Option<usize> {
        self.first[i]
    }
}

/// Barriers `r_j(x) = inf{t : (t, x) ∈ R_j}` for `j = 1..=n`.
#[derive(Clone, Debug)]
pub struct BarrierFamily {
    grid: SpaceTimeGrid,
    threshold: f64,
    layers: Vec<LayerBarrier>,
}

impl BarrierFamily {
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Number of barriers (partition gaps).
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Barrier of layer `j ≥ 1`.
    pub fn layer(&self, j: usize) -> &LayerBarrier {
        &self.layers[j - 1]
    }

    /// `r_j(x_i)`, `+∞` for the beyond-horizon sentinel.
    pub fn r(&self, j: usize, i: usize) -> f64 {
        self.layer(j).first[i].map_or(f64::INFINITY, |m| self.grid.t(m))
    }

    pub fn is_stopped(&self, j: usize, m: usize, i: usize) -> bool {
        self.layer(j).first[i].is_some_and(|f| m >= f)
    }
}

/// Thresholds the obstacle gap at the solve-time barrier threshold and takes
/// the first stopped time per node, so every later time is in the region.
/// Nodes that were above the threshold after a first stop are counted.
pub fn extract(surface: &ValueSurface) -> Result<BarrierFamily> {
    let grid = *surface.grid();
    let nx = grid.nx();
    let traces = surface.traces();
    let s = surface.partition().points();
    let mut layers = Vec::with_capacity(s.len() - 1);
    for j in 1..s.len() {
        let first: Vec<Option<usize>> = (0..nx).map(|i| traces.first_stop(nx, j, i)).collect();
        let flagged: u64 = (0..nx).map(|i| traces.late_unstopped(nx, j, i) as u64).sum();
        let region: u64 = first.iter().flatten().map(|&m| (grid.steps - m + 1) as u64).sum();
        let fraction = if region > 0 { flagged as f64 / region as f64 } else { 0.0 };
        if fraction > MAX_FLAGGED_FRACTION {
            return Err(Error::ExtractionUnstable { layer: j, flagged, region, fraction });
        }
        layers.push(LayerBarrier { s: s[j], first, flagged, region });
    }
    Ok(BarrierFamily { grid, threshold: traces.threshold, layers })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderingReport {
    pub ordered: bool,
    pub violation_count: usize,
    /// `(j, x)` with `r_j(x) > r_{j+1}(x)`, at most 64.
    pub violations: Vec<(usize, f64)>,
}

/// Nested regions `R_j ⊇ R_{j+1}`, i.e. `r_j ≤ r_{j+1}` pointwise.
pub fn ordering_check(barriers: &BarrierFamily) -> OrderingReport {
    let nx = barriers.grid.nx();
    let mut violations = Vec::new();
    let mut count = 0;
    for j in 1..barriers.len() {
        for i in 0..nx {
            if barriers.r(j, i) > barriers.r(j + 1, i) {
                count += 1;
                if violations.len() < 64 {
                    violations.push((j, barriers.grid.x(i)));
                }
            }
        }
    }
    OrderingReport { ordered: count == 0, violation_count: count, violations }
}

/// `sup |r_j(x) - r(x)|` over nodes with `|x| ≤ reach`; two infinite
/// values are at distance 0.
pub fn analytic_compare<F: Fn(f64) -> f64>(barriers: &BarrierFamily, j: usize, reach: f64, exact: F) -> f64 {
    let grid = &barriers.grid;
    (0..grid.nx())
        .filter(|&i| grid.x(i).abs() <= reach + 1e-12)
        .map(|i| {
            let (a, b) = (barriers.r(j, i), exact(grid.x(i)));
            if a.is_infinite() && b.is_infinite() && a.signum() == b.signum() {
                0.0
            } else {
                (a - b).abs()
            }
        })
        .fold(0.0, f64::max)
}
