//! Partitions of the marginal index interval and the space-time lattice.

use crate::error::{Error, Result};
use crate::marginals::MarginalFamily;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStyle {
    Uniform,
    /// Gaps proportional to `1.2^j`.
    Geometric,
}

/// `0 = s_0 < s_1 < … < s_n = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    points: Vec<f64>,
    mesh: f64,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points[0] != 0.0 || *points.last().expect("non-empty") != 1.0 {
            return Err(Error::Domain("partition must run from 0 to 1".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("partition points must be strictly increasing".into()));
        }
        let mesh = points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Ok(Self { points, mesh })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of gaps.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Inserts the midpoint of every gap.
    pub fn refine(&self) -> Self {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            points.push(w[0]);
            points.push(0.5 * (w[0] + w[1]));
        }
        points.push(1.0);
        Self::new(points).expect("refinement of a valid partition")
    }

    /// Index of the first partition point `≥ s`; the piecewise-constant
    /// extension assigns `s ∈ (s_{j-1}, s_j]` to `j`.
    pub fn cell_of(&self, s: f64) -> usize {
        self.points.partition_point(|&p| p < s).min(self.len())
    }
}

pub fn make_partition(n: usize, style: PartitionStyle) -> Result<Partition> {
    if n == 0 {
        return Err(Error::Domain("partition needs at least one gap".into()));
    }
    let points = match style {
        PartitionStyle::Uniform => (0..=n).map(|j| j as f64 / n as f64).collect(),
        PartitionStyle::Geometric => {
            let gaps: Vec<f64> = (0..n).map(|j| 1.2_f64.powi(j as i32)).collect();
            let total: f64 = gaps.iter().sum();
            let mut acc = 0.0;
            let mut pts = vec![0.0];
            for g in &gaps[..n - 1] {
                acc += g;
                pts.push(acc / total);
            }
            pts.push(1.0);
            pts
        }
    };
    Partition::new(points)
}

pub const DEFAULT_NODE_BUDGET: u64 = 400_000_000;

/// Random-walk lattice: `x_i = (i - K)·Δx` for `i = 0..=2K`, `t_m = m·Δt`
/// for `m = 0..=nt`, with `Δt = Δx²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpaceTimeGrid {
    pub dx: f64,
    pub dt: f64,
    /// Index of `x = 0`; the lattice has `2·centre + 1` nodes.
    pub centre: usize,
    /// Number of time steps.
    pub steps: usize,
}

impl SpaceTimeGrid {
    pub fn new(dx: f64, centre: usize, steps: usize) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) || centre == 0 || steps == 0 {
            return Err(Error::Domain(format!("bad grid: dx = {dx}, centre = {centre}, steps = {steps}")));
        }
        Ok(Self { dx, dt: dx * dx, centre, steps })
    }

    pub fn nx(&self) -> usize {
        2 * self.centre + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.centre as f64) * self.dx
    }

    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn half_width(&self) -> f64 {
        self.x(self.nx() - 1)
    }

    pub fn horizon(&self) -> f64 {
        self.t(self.steps)
    }

    pub fn lambda(&self) -> f64 {
        self.dt / (self.dx * self.dx)
    }

    pub fn nodes(&self) -> u64 {
        self.nx() as u64 * (self.steps as u64 + 1)
    }

    /// Nearest node index to `x`, clamped to the lattice.
    pub fn nearest_x(&self, x: f64) -> usize {
        let k = (x / self.dx).round() + self.centre as f64;
        k.clamp(0.0, (self.nx() - 1) as f64) as usize
    }

    /// Time index of `t` when it lies on the lattice (to `1e-9` steps).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let m = t / self.dt;
        let r = m.round();
        ((m - r).abs() < 1e-9 && r >= 0.0 && r <= self.steps as f64).then_some(r as usize)
    }
}

/// Lattice covering the support of every marginal plus three standard
/// deviations of Brownian motion over the horizon. The horizon is rounded
/// up to a whole number of steps.
pub fn make_grid(family: &MarginalFamily, horizon: f64, dx: f64, node_budget: u64) -> Result<SpaceTimeGrid> {
    if !(horizon > 0.0 && horizon.is_finite()) || !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Domain(format!("horizon {horizon} and dx {dx} must be positive")));
    }
    let reach = family.max_support_radius() + 3.0 * horizon.sqrt();
    let centre = (reach / dx - 1e-9).ceil() as usize;
    let steps = (horizon / (dx * dx) - 1e-9).ceil() as usize;
    let grid = SpaceTimeGrid::new(dx, centre, steps)?;
    if grid.nodes() > node_budget {
        return Err(Error::Resource(format!(
            "grid has {} x-nodes by {} t-nodes = {} nodes, budget {}",
            grid.nx(),
            steps + 1,
            grid.nodes(),
            node_budget
        )));
    }
    Ok(grid)
}
