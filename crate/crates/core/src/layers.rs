//! Layered optimal stopping on the `±Δx` random walk: layer `j` may stop
//! and collect the obstacle `layer_{j-1} + ΔU_j`, or continue with the
//! two-point average of the previous time row.

use crate::error::{Error, Result};
use crate::grid::{Partition, SpaceTimeGrid};
use crate::marginals::MarginalFamily;
use rayon::prelude::*;
use serde::Serialize;

/// Largest positive potential increment tolerated before the family is
/// rejected as not increasing in convex order.
pub const ORDER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Keep every `record_every`-th time row (and the row before it).
    pub record_every: usize,
    /// Obstacle gap at or below which a node counts as stopped.
    pub barrier_threshold: f64,
}

/// Full-resolution stopping information gathered while marching.
#[derive(Clone, Debug)]
pub struct StopTraces {
    pub threshold: f64,
    /// First time index with gap `≤ threshold`, `u32::MAX` if none.
    first: Vec<u32>,
    /// Later time indices whose gap went back above the threshold.
    late: Vec<u32>,
}

impl StopTraces {
    pub fn first_stop(&self, nx: usize, j: usize, i: usize) -> Option<usize> {
        let v = self.first[j * nx + i];
        (v != u32::MAX).then_some(v as usize)
    }

    pub fn late_unstopped(&self, nx: usize, j: usize, i: usize) -> u32 {
        self.late[j * nx + i]
    }
}

/// Grid values `u(s_j, t_m, x_i)` on the recorded time rows.
#[derive(Clone, Debug)]
pub struct ValueSurface {
    partition: Partition,
    grid: SpaceTimeGrid,
    stored: Vec<usize>,
    main_rows: Vec<usize>,
    values: Vec<f64>,
    increments: Vec<f64>,
    traces: StopTraces,
}

impl ValueSurface {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Number of layers including layer 0.
    pub fn layers(&self) -> usize {
        self.partition.points().len()
    }

    /// Recorded rows: multiples of the record stride and the last row.
    pub fn main_rows(&self) -> &[usize] {
        &self.main_rows
    }

    /// All stored rows: main rows and their predecessors.
    pub fn stored_rows(&self) -> &[usize] {
        &self.stored
    }

    fn slot(&self, m: usize) -> Option<usize> {
        self.stored.binary_search(&m).ok()
    }

    /// Row `m` of layer `j`, if stored.
    pub fn row(&self, m: usize, j: usize) -> Option<&[f64]> {
        let nx = self.grid.nx();
        let k = self.slot(m)?;
        let start = (k * self.layers() + j) * nx;
        Some(&self.values[start..start + nx])
    }

    pub fn value(&self, j: usize, m: usize, i: usize) -> Option<f64> {
        self.row(m, j).map(|r| r[i])
    }

    /// `ΔU_j(x_i) = U(s_j, x_i) - U(s_{j-1}, x_i)`; zero for `j = 0`.
    pub fn increment(&self, j: usize, i: usize) -> f64 {
        self.increments[j * self.grid.nx() + i]
    }

    /// `u_j - u_{j-1} - ΔU_j` at a stored node; zero on layer 0.
    pub fn obstacle_gap(&self, j: usize, m: usize, i: usize) -> Option<f64> {
        if j == 0 {
            return self.row(m, 0).map(|_| 0.0);
        }
        Some(self.value(j, m, i)? - self.value(j - 1, m, i)? - self.increment(j, i))
    }

    pub fn traces(&self) -> &StopTraces {
        &self.traces
    }

    /// Adds `delta` to one stored value. Diagnostics only.
    pub fn perturb(&mut self, j: usize, m: usize, i: usize, delta: f64) {
        let nx = self.grid.nx();
        let k = self.slot(m).expect("row is stored");
        let layers = self.layers();
        self.values[(k * layers + j) * nx + i] += delta;
    }
}

/// Potentials `U(s_j, x_i)` for every partition point, row-major in `j`.
pub(crate) fn potential_table(
    family: &MarginalFamily,
    partition: &Partition,
    grid: &SpaceTimeGrid,
) -> Result<Vec<Vec<f64>>> {
    partition
        .points()
        .par_iter()
        .map(|&s| (0..grid.nx()).map(|i| family.potential(s, grid.x(i))).collect::<Result<Vec<f64>>>())
        .collect()
}

/// Increments `U(s_j) - U(s_{j-1})` with the convex-order gate applied.
pub(crate) fn increment_table(
    potentials: &[Vec<f64>],
    partition: &Partition,
    grid: &SpaceTimeGrid,
) -> Result<Vec<f64>> {
    let nx = grid.nx();
    let mut inc = vec![0.0; potentials.len() * nx];
    let mut worst: Option<(usize, usize, f64)> = None;
    for j in 1..potentials.len() {
        for i in 0..nx {
            let d = potentials[j][i] - potentials[j - 1][i];
            inc[j * nx + i] = d;
            if d > ORDER_TOL && worst.is_none_or(|w| d > w.2) {
                worst = Some((j, i, d));
            }
        }
    }
    if let Some((j, i, d)) = worst {
        let s = partition.points();
        return Err(Error::ConvexOrder { s_prev: s[j - 1], s: s[j], x: grid.x(i), increment: d });
    }
    Ok(inc)
}

/// Marches all layers forward in time from `u(s_j, 0, ·) = U(0, ·)` with
/// Dirichlet data `U(s_j, ±L)`. Ties between stopping and continuing stop.
pub fn solve_layers(
    family: &MarginalFamily,
    partition: &Partition,
    grid: &SpaceTimeGrid,
    opts: &SolveOptions,
) -> Result<ValueSurface> {
    if grid.lambda() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("parabolic ratio {} exceeds 1", grid.lambda())));
    }
    if opts.record_every == 0 {
        return Err(Error::Domain("record stride must be positive".into()));
    }
    let nx = grid.nx();
    let layers = partition.points().len();
    let steps = grid.steps;
    if steps >= u32::MAX as usize {
        return Err(Error::Resource(format!("{steps} time steps exceed the trace index range")));
    }
    let pots = potential_table(family, partition, grid)?;
    let inc = increment_table(&pots, partition, grid)?;

    let mut keep = vec![false; steps + 1];
    let mut main_rows = Vec::new();
    for m in (0..=steps).filter(|&m| m % opts.record_every == 0 || m == steps) {
        main_rows.push(m);
        keep[m] = true;
        if m > 0 {
            keep[m - 1] = true;
        }
    }
    let stored: Vec<usize> = (0..=steps).filter(|&m| keep[m]).collect();
    let mut values = Vec::with_capacity(stored.len() * layers * nx);

    let thr = opts.barrier_threshold;
    let mut first = vec![u32::MAX; layers * nx];
    let mut late = vec![0u32; layers * nx];

    let mut cur: Vec<f64> = (0..layers).flat_map(|_| pots[0].iter().copied()).collect();
    let mut next = cur.clone();

    // the t = 0 row: every layer equals U(0, ·), stopped wherever ΔU vanishes
    for j in 1..layers {
        for i in 0..nx {
            if -inc[j * nx + i] <= thr {
                first[j * nx + i] = 0;
            }
        }
    }
    values.extend_from_slice(&cur);

    for m in 1..=steps {
        for j in 1..layers {
            let (done, rest) = next.split_at_mut(j * nx);
            let below = &done[(j - 1) * nx..];
            let out = &mut rest[..nx];
            let prev = &cur[j * nx..(j + 1) * nx];
            let inc_j = &inc[j * nx..(j + 1) * nx];
            let first_j = &mut first[j * nx..(j + 1) * nx];
            let late_j = &mut late[j * nx..(j + 1) * nx];
            out[0] = pots[j][0];
            out[nx - 1] = pots[j][nx - 1];
            for i in 1..nx - 1 {
                let cont = 0.5 * (prev[i - 1] + prev[i + 1]);
                let stop = below[i] + inc_j[i];
                out[i] = if stop >= cont { stop } else { cont };
            }
            for i in 0..nx {
                let gap = out[i] - below[i] - inc_j[i];
                if gap <= thr {
                    if first_j[i] == u32::MAX {
                        first_j[i] = m as u32;
                    }
                } else if first_j[i] != u32::MAX {
                    late_j[i] += 1;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if keep[m] {
            values.extend_from_slice(&cur);
        }
    }

    Ok(ValueSurface {
        partition: partition.clone(),
        grid: *grid,
        stored,
        main_rows,
        values,
        increments: inc,
        traces: StopTraces { threshold: thr, first, late },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NodeRef {
    pub j: usize,
    pub m: usize,
    pub i: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplementarityReport {
    pub tolerance: f64,
    pub nodes: u64,
    /// Largest `|heat residual|` over nodes whose obstacle gap exceeds the tolerance.
    pub max_heat_residual: f64,
    /// Largest amount by which `u_j` falls below the obstacle.
    pub max_obstacle_violation: f64,
    /// Largest of `min(heat, gap)`, `-heat` and `-gap`.
    pub max_violation: f64,
    pub worst: Option<NodeRef>,
    /// Fraction of nodes where both residuals exceed the tolerance.
    pub both_positive_fraction: f64,
    pub flagged_count: u64,
    /// First flagged nodes in `(m, j, i)` order, at most 64.
    pub flagged: Vec<NodeRef>,
    pub pass: bool,
}

/// Discrete complementarity on recorded rows, interior nodes, layers `≥ 1`.
/// Residuals are in value units per time step.
pub fn complementarity_check(surface: &ValueSurface, tolerance: f64) -> ComplementarityReport {
    let nx = surface.grid.nx();
    let mut rep = ComplementarityReport {
        tolerance,
        nodes: 0,
        max_heat_residual: 0.0,
        max_obstacle_violation: 0.0,
        max_violation: 0.0,
        worst: None,
        both_positive_fraction: 0.0,
        flagged_count: 0,
        flagged: Vec::new(),
        pass: true,
    };
    let mut both = 0u64;
    for &m in surface.main_rows.iter().filter(|&&m| m > 0) {
        for j in 1..surface.layers() {
            let now = surface.row(m, j).expect("main row stored");
            let before = surface.row(m - 1, j).expect("predecessor stored");
            let below = surface.row(m, j - 1).expect("main row stored");
            for i in 1..nx - 1 {
                let heat = now[i] - 0.5 * (before[i - 1] + before[i + 1]);
                let gap = now[i] - below[i] - surface.increment(j, i);
                let v = heat.min(gap).max(-heat).max(-gap);
                rep.nodes += 1;
                if gap > tolerance {
                    rep.max_heat_residual = rep.max_heat_residual.max(heat.abs());
                    if heat > tolerance {
                        both += 1;
                    }
                }
                rep.max_obstacle_violation = rep.max_obstacle_violation.max(-gap);
                if v > rep.max_violation {
                    rep.max_violation = v;
                    rep.worst = Some(NodeRef { j, m, i });
                }
                if v > tolerance {
                    rep.flagged_count += 1;
                    if rep.flagged.len() < 64 {
                        rep.flagged.push(NodeRef { j, m, i });
                    }
                }
            }
        }
    }
    rep.both_positive_fraction = if rep.nodes > 0 { both as f64 / rep.nodes as f64 } else { 0.0 };
    rep.pass = rep.max_violation <= tolerance;
    rep
}
