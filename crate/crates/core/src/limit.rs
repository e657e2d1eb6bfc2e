//! Full-marginal surface as the limit of layered solutions under partition
//! refinement, with the residual, bound, regularity and uniqueness checks.

use crate::error::{Error, Result};
use crate::gaussian;
use crate::grid::{make_partition, Partition, PartitionStyle, SpaceTimeGrid};
use crate::layers::{solve_layers, SolveOptions, ValueSurface};
use crate::marginals::{assumption_check, AssumptionReport, GrowthEnvelope, MarginalFamily};
use crate::tolerances::Tolerances;
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct LimitOptions {
    pub n0: usize,
    pub levels: usize,
    pub style: PartitionStyle,
    /// Time stride of the evaluation lattice, in grid steps.
    pub record_every: usize,
    /// Space stride of the evaluation lattice, in grid nodes.
    pub x_stride: usize,
    /// Lattice covers `|x| ≤ reach`.
    pub reach: f64,
    /// Number of uniform gaps of the lattice in `s`.
    pub s_cells: usize,
    pub tolerances: Tolerances,
}

impl LimitOptions {
    /// Partition of level `k`.
    pub fn partition(&self, level: usize) -> Result<Partition> {
        match self.style {
            PartitionStyle::Uniform => make_partition(self.n0 << level, PartitionStyle::Uniform),
            PartitionStyle::Geometric => {
                let mut p = make_partition(self.n0, PartitionStyle::Geometric)?;
                for _ in 0..level {
                    p = p.refine();
                }
                Ok(p)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelRecord {
    pub n: usize,
    pub mesh: f64,
    /// Sup distance to the previous level on the lattice.
    pub cauchy_diff: Option<f64>,
    pub pde_residual_max: f64,
    pub runtime_ms: u128,
}

/// `u(s, t, x)` on a fixed lattice for every refinement level.
#[derive(Clone, Debug)]
pub struct LimitSurface {
    pub s_nodes: Vec<f64>,
    /// Grid time indices of the lattice.
    pub t_index: Vec<usize>,
    /// Grid space indices of the lattice.
    pub x_index: Vec<usize>,
    /// Per level, values in `[s][t][x]` order.
    levels: Vec<Vec<f64>>,
    pub history: Vec<LevelRecord>,
    pub finest: ValueSurface,
    pub grid: SpaceTimeGrid,
    pub assumptions: AssumptionReport,
    pub outside_assumptions: bool,
    pub style: PartitionStyle,
}

impl LimitSurface {
    fn offset(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.t_index.len() + b) * self.x_index.len() + c
    }

    /// Finest-level value at lattice position `(a, b, c)`.
    pub fn at(&self, a: usize, b: usize, c: usize) -> f64 {
        self.levels.last().expect("at least one level")[self.offset(a, b, c)]
    }

    pub fn level_at(&self, level: usize, a: usize, b: usize, c: usize) -> f64 {
        self.levels[level][self.offset(a, b, c)]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn t(&self, b: usize) -> f64 {
        self.grid.t(self.t_index[b])
    }

    pub fn x(&self, c: usize) -> f64 {
        self.grid.x(self.x_index[c])
    }

    /// Lattice node closest to `(s, t, x)`.
    pub fn nearest(&self, s: f64, t: f64, x: f64) -> (usize, usize, usize) {
        let near = |v: &[f64], q: f64| {
            v.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - q).abs().total_cmp(&(b.1 - q).abs()))
                .map(|(k, _)| k)
                .expect("non-empty lattice")
        };
        let ts: Vec<f64> = (0..self.t_index.len()).map(|b| self.t(b)).collect();
        let xs: Vec<f64> = (0..self.x_index.len()).map(|c| self.x(c)).collect();
        (near(&self.s_nodes, s), near(&ts, t), near(&xs, x))
    }
}

fn lattice_x(grid: &SpaceTimeGrid, stride: usize, reach: f64) -> Vec<usize> {
    (1..grid.nx() - 1)
        .filter(|&i| (i as i64 - grid.centre as i64).rem_euclid(stride as i64) == 0 && grid.x(i).abs() <= reach + 1e-12)
        .collect()
}

/// Lattice values of the piecewise-constant extension `u(s) := u(s_j)` for
/// `s ∈ (s_{j-1}, s_j]`.
fn sample_lattice(surface: &ValueSurface, s_nodes: &[f64], t_index: &[usize], x_index: &[usize]) -> Vec<f64> {
    let p = surface.partition();
    let mut out = Vec::with_capacity(s_nodes.len() * t_index.len() * x_index.len());
    for &s in s_nodes {
        let j = p.cell_of(s);
        for &m in t_index {
            let row = surface.row(m, j).expect("lattice row stored");
            out.extend(x_index.iter().map(|&i| row[i]));
        }
    }
    out
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves on `levels` successively refined partitions and compares levels on
/// a common lattice. Stops with an error as soon as a Cauchy difference
/// fails to shrink.
pub fn solve_limit(family: &MarginalFamily, grid: &SpaceTimeGrid, opts: &LimitOptions) -> Result<LimitSurface> {
    if opts.levels < 2 {
        return Err(Error::Domain(format!("need at least two refinement levels, got {}", opts.levels)));
    }
    if opts.s_cells == 0 || opts.x_stride == 0 {
        return Err(Error::Domain("lattice strides must be positive".into()));
    }
    let s_nodes: Vec<f64> = (0..=opts.s_cells).map(|k| k as f64 / opts.s_cells as f64).collect();
    let x_index = lattice_x(grid, opts.x_stride, opts.reach);
    let mut x_probes: Vec<f64> = x_index.iter().map(|&i| grid.x(i)).collect();
    x_probes.extend((0..=200).map(|k| opts.reach * (k as f64 / 100.0 - 1.0)));
    let assumptions = assumption_check(family, &x_probes, 2001);
    let outside_assumptions = !assumptions.within_assumptions();

    let solve_opts = SolveOptions { record_every: opts.record_every, barrier_threshold: opts.tolerances.barrier(grid) };
    let level_count = if family.is_constant() { 1 } else { opts.levels };
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(level_count);
    let mut history: Vec<LevelRecord> = Vec::with_capacity(level_count);
    let mut finest = None;
    let mut t_index = Vec::new();
    for level in 0..level_count {
        let start = Instant::now();
        let partition = opts.partition(level)?;
        let surface = solve_layers(family, &partition, grid, &solve_opts)?;
        if level == 0 {
            t_index = surface.main_rows().to_vec();
        }
        let values = sample_lattice(&surface, &s_nodes, &t_index, &x_index);
        let residual = residual_max(&surface, family, &t_index, &x_index)?.max_abs;
        let cauchy_diff = levels.last().map(|prev| sup_diff(prev, &values));
        history.push(LevelRecord {
            n: partition.len(),
            mesh: partition.mesh(),
            cauchy_diff,
            pde_residual_max: residual,
            runtime_ms: start.elapsed().as_millis(),
        });
        levels.push(values);
        finest = Some(surface);
        let diffs: Vec<f64> = history.iter().filter_map(|h| h.cauchy_diff).collect();
        if let [.., previous, current] = diffs[..] {
            if current >= previous && previous > 1e-12 {
                return Err(Error::NonConvergence { level, previous, current });
            }
        }
    }
    Ok(LimitSurface {
        s_nodes,
        t_index,
        x_index,
        levels,
        history,
        finest: finest.expect("at least one level"),
        grid: *grid,
        assumptions,
        outside_assumptions,
        style: opts.style,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    /// `(s, t, x)` of the largest `|F|`.
    pub location: Option<(f64, f64, f64)>,
    /// Most negative heat term and `s`-term seen.
    pub min_heat: f64,
    pub min_s_term: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn residual_max(
    surface: &ValueSurface,
    family: &MarginalFamily,
    rows: &[usize],
    xs: &[usize],
) -> Result<ResidualReport> {
    let grid = surface.grid();
    let s = surface.partition().points();
    let mut rep =
        ResidualReport { max_abs: 0.0, location: None, min_heat: 0.0, min_s_term: 0.0, tolerance: 0.0, pass: true };
    for j in 1..s.len() {
        let ds = s[j] - s[j - 1];
        let slope: Vec<f64> = xs.iter().map(|&i| family.potential_ds(s[j], grid.x(i))).collect::<Result<_>>()?;
        for &m in rows.iter().filter(|&&m| m > 0) {
            let now = surface.row(m, j).expect("stored");
            let before = surface.row(m - 1, j).expect("stored");
            let below = surface.row(m, j - 1).expect("stored");
            for (c, &i) in xs.iter().enumerate() {
                let heat = (now[i] - 0.5 * (before[i - 1] + before[i + 1])) / grid.dt;
                let s_term = (now[i] - below[i]) / ds - slope[c];
                let f = heat.min(s_term);
                rep.min_heat = rep.min_heat.min(heat);
                rep.min_s_term = rep.min_s_term.min(s_term);
                if f.abs() > rep.max_abs {
                    rep.max_abs = f.abs();
                    rep.location = Some((s[j], grid.t(m), grid.x(i)));
                }
            }
        }
    }
    Ok(rep)
}

/// Discrete `min{∂_t u - ½∂_xx u, ∂_s(u - U)}` on the finest partition at
/// interior lattice nodes (`s > 0`, `t > 0`), with a backward `s`-difference
/// and the exact `∂U/∂s`.
pub fn pde_residual(limit: &LimitSurface, family: &MarginalFamily, tolerances: &Tolerances) -> Result<ResidualReport> {
    let mut rep = residual_max(&limit.finest, family, &limit.t_index, &limit.x_index)?;
    rep.tolerance = tolerances.pde(&limit.grid, limit.finest.partition().mesh());
    rep.pass = rep.max_abs <= rep.tolerance;
    Ok(rep)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BoundCheck {
    pub violations: u64,
    /// Smallest slack `rhs - lhs` seen (negative means violated).
    pub worst_margin: f64,
    pub worst_at: Option<(f64, f64, f64)>,
}

impl BoundCheck {
    fn record(&mut self, lhs: f64, rhs: f64, tol: f64, at: (f64, f64, f64)) {
        let margin = rhs - lhs;
        if self.worst_at.is_none() || margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst_at = Some(at);
        }
        if lhs > rhs + tol {
            self.violations += 1;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub tolerance: f64,
    /// `-|x| - √t·E|N(0,1)| ≤ U_{N(0,t)}(x)`.
    pub gaussian_floor: BoundCheck,
    /// `U_{N(0,t)}(x) ≤ u(1, t, x)`.
    pub brownian_lower: BoundCheck,
    /// `u(1, t, x) ≤ u(s, t, x)`.
    pub terminal_below: BoundCheck,
    /// `u(s, t, x) ≤ U(0, x)`.
    pub initial_above: BoundCheck,
    /// `E U(0, x + √t Z) ≤ u(1, t, x)`, valid for any initial law.
    pub smoothed_lower: BoundCheck,
    /// All four stated inequalities hold.
    pub pass: bool,
    /// The chain holds with the smoothed lower bound in place of the Brownian one.
    pub pass_smoothed: bool,
}

/// Linear-growth bounds at every lattice node.
pub fn bounds_check(limit: &LimitSurface, family: &MarginalFamily, tolerance: f64) -> Result<BoundsReport> {
    let law0 = family.law(0.0)?;
    let last = limit.s_nodes.len() - 1;
    let mut rep = BoundsReport {
        tolerance,
        gaussian_floor: BoundCheck::default(),
        brownian_lower: BoundCheck::default(),
        terminal_below: BoundCheck::default(),
        initial_above: BoundCheck::default(),
        smoothed_lower: BoundCheck::default(),
        pass: false,
        pass_smoothed: false,
    };
    for c in 0..limit.x_index.len() {
        let x = limit.x(c);
        let u0 = family.potential(0.0, x)?;
        for b in 0..limit.t_index.len() {
            let t = limit.t(b);
            let gauss = gaussian::potential(t, x);
            let terminal = limit.at(last, b, c);
            let at = (1.0, t, x);
            rep.gaussian_floor.record(-x.abs() - t.sqrt() * gaussian::MEAN_ABS, gauss, tolerance, at);
            rep.brownian_lower.record(gauss, terminal, tolerance, at);
            rep.smoothed_lower.record(law0.smoothed_potential(t, x), terminal, tolerance, at);
            for (a, &s) in limit.s_nodes.iter().enumerate() {
                let u = limit.at(a, b, c);
                rep.terminal_below.record(terminal, u, tolerance, (s, t, x));
                rep.initial_above.record(u, u0, tolerance, (s, t, x));
            }
        }
    }
    let chain = rep.terminal_below.violations == 0 && rep.initial_above.violations == 0;
    rep.pass = chain && rep.gaussian_floor.violations == 0 && rep.brownian_lower.violations == 0;
    rep.pass_smoothed = chain && rep.smoothed_lower.violations == 0;
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    /// `max |Δu/Δx|` over adjacent grid nodes on lattice rows.
    pub x_ratio: f64,
    /// `max |Δu|/√Δt` over pairs of stored rows.
    pub t_ratio: f64,
    /// Largest `u(s_j) - u(s_{j-1})`; non-positive for a monotone surface.
    pub s_increment_max: f64,
    /// `max |Δu/Δs|` per lattice `x`.
    pub s_lipschitz: Vec<(f64, f64)>,
    pub envelope: Option<GrowthEnvelope>,
    /// Largest `|Δu/Δs| / bound(x)`; at most 1 when under the envelope.
    pub envelope_ratio: Option<f64>,
}

/// Lipschitz and Hölder quotients of the finest surface.
pub fn regularity_report(limit: &LimitSurface) -> RegularityReport {
    let surface = &limit.finest;
    let grid = surface.grid();
    let s = surface.partition().points();
    let nx = grid.nx();
    let mut x_ratio: f64 = 0.0;
    let mut t_ratio: f64 = 0.0;
    let mut s_increment_max = f64::NEG_INFINITY;
    let mut s_lip = vec![0.0_f64; limit.x_index.len()];
    let stored = surface.stored_rows();
    for (k, &m) in stored.iter().enumerate() {
        for j in 0..s.len() {
            let row = surface.row(m, j).expect("stored");
            for i in 1..nx {
                x_ratio = x_ratio.max((row[i] - row[i - 1]).abs() / grid.dx);
            }
            for &m0 in &stored[..k] {
                let early = surface.row(m0, j).expect("stored");
                let scale = (grid.t(m) - grid.t(m0)).sqrt();
                for &i in &limit.x_index {
                    t_ratio = t_ratio.max((row[i] - early[i]).abs() / scale);
                }
            }
            if j > 0 {
                let below = surface.row(m, j - 1).expect("stored");
                for (c, &i) in limit.x_index.iter().enumerate() {
                    let d = row[i] - below[i];
                    s_increment_max = s_increment_max.max(d);
                    s_lip[c] = s_lip[c].max(d.abs() / (s[j] - s[j - 1]));
                }
            }
        }
    }
    let envelope = limit.assumptions.envelope;
    let envelope_ratio = envelope.map(|e| {
        limit
            .x_index
            .iter()
            .zip(&s_lip)
            .map(|(&i, &l)| {
                let b = e.bound(grid.x(i));
                if b > 0.0 {
                    l / b
                } else if l == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    });
    RegularityReport {
        x_ratio,
        t_ratio,
        s_increment_max: s_increment_max.max(f64::MIN),
        s_lipschitz: limit.x_index.iter().map(|&i| grid.x(i)).zip(s_lip).collect(),
        envelope,
        envelope_ratio,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndependenceReport {
    pub distance: f64,
    /// Sum of both runs' finest Cauchy differences plus twice the scheme tolerance.
    pub bound: f64,
    pub within_bound: bool,
    pub uniform_mesh: f64,
    pub geometric_mesh: f64,
}

/// Runs the uniform and geometric refinement sequences in parallel and
/// compares their finest levels on the uniform lattice.
pub fn partition_independence(
    family: &MarginalFamily,
    grid: &SpaceTimeGrid,
    opts: &LimitOptions,
) -> Result<(IndependenceReport, LimitSurface, LimitSurface)> {
    let uni = LimitOptions { style: PartitionStyle::Uniform, ..opts.clone() };
    let geo = LimitOptions { style: PartitionStyle::Geometric, ..opts.clone() };
    let (a, b) = rayon::join(|| solve_limit(family, grid, &uni), || solve_limit(family, grid, &geo));
    let (a, b) = (a?, b?);
    let distance = sup_diff(a.levels.last().expect("level"), b.levels.last().expect("level"));
    let last = |l: &LimitSurface| l.history.last().and_then(|h| h.cauchy_diff).unwrap_or(0.0);
    let bound = last(&a) + last(&b) + 2.0 * opts.tolerances.scheme(grid);
    let report = IndependenceReport {
        distance,
        bound,
        within_bound: distance <= bound,
        uniform_mesh: a.finest.partition().mesh(),
        geometric_mesh: b.finest.partition().mesh(),
    };
    Ok((report, a, b))
}
