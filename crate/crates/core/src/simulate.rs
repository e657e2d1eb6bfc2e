//! Brownian paths run through extracted barriers, the comparison
//! embedding, and the statistics computed from stopped values.

use crate::barriers::{extract, BarrierFamily};
use crate::error::{Error, Result};
use crate::grid::{make_partition, PartitionStyle, SpaceTimeGrid};
use crate::layers::{solve_layers, SolveOptions, ValueSurface};
use crate::marginals::{Law, MarginalFamily};
use crate::payoff::PiecewisePoly;
use crate::stats::{ks_statistic, Estimate};
use crate::tolerances::Tolerances;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Largest tolerated share of paths not stopped by the horizon.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;

/// Stream offset separating the comparison embedding from Root paths.
const ALTERNATIVE_STREAMS: u64 = 1 << 62;

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub paths: usize,
    pub h_sim: f64,
    pub seed: u64,
    /// Times at which `B_{t ∧ σ_n}` is kept; multiples of `h_sim`.
    pub probe_times: Vec<f64>,
}

/// Stopping times and stopped values per path, row-major `[path][j]`.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub paths: usize,
    pub layers: usize,
    pub h_sim: f64,
    pub seed: u64,
    pub horizon: f64,
    pub probe_times: Vec<f64>,
    pub censored: usize,
    /// Half-width within which a stopped value counts toward an atom:
    /// half the barrier grid spacing, since barriers are node-resolved.
    pub atom_window: f64,
    x0: Vec<f64>,
    sigma: Vec<f64>,
    stopped: Vec<f64>,
    probes: Vec<f64>,
}

impl PathEnsemble {
    pub fn initial(&self) -> &[f64] {
        &self.x0
    }

    /// `σ_j` of every path, `j ≥ 1`.
    pub fn sigma(&self, j: usize) -> Vec<f64> {
        (0..self.paths).map(|p| self.sigma[p * self.layers + j - 1]).collect()
    }

    /// `B_{σ_j}` of every path.
    pub fn stopped(&self, j: usize) -> Vec<f64> {
        (0..self.paths).map(|p| self.stopped[p * self.layers + j - 1]).collect()
    }

    pub fn path_sigma(&self, p: usize, j: usize) -> f64 {
        self.sigma[p * self.layers + j - 1]
    }

    pub fn path_stopped(&self, p: usize, j: usize) -> f64 {
        self.stopped[p * self.layers + j - 1]
    }

    /// `B_{t ∧ σ_j}` of every path, for `t = 0`, a probe time, or `t ≥` horizon.
    pub fn stopped_at(&self, j: usize, t: f64) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(self.x0.clone());
        }
        if t >= self.horizon {
            return Ok(self.stopped(j));
        }
        let q = self
            .probe_times
            .iter()
            .position(|&p| (p - t).abs() < 1e-12)
            .ok_or_else(|| Error::Domain(format!("t = {t} is not a probe time")))?;
        let nq = self.probe_times.len();
        Ok((0..self.paths)
            .map(|p| {
                let k = p * self.layers + j - 1;
                if self.sigma[k] <= t {
                    self.stopped[k]
                } else {
                    self.probes[p * nq + q]
                }
            })
            .collect())
    }
}

/// `r_j(x)` interpolated linearly between nodes; an infinite node value
/// makes the whole adjacent cell infinite except the finite endpoint.
struct Lookup {
    dx: f64,
    centre: f64,
    r: Vec<f64>,
    /// `mins[k][i] = min r[i .. i + 2^k]`.
    mins: Vec<Vec<f64>>,
}

impl Lookup {
    fn new(barriers: &BarrierFamily, j: usize) -> Self {
        let grid = barriers.grid();
        let raw: Vec<f64> = (0..grid.nx()).map(|i| barriers.r(j, i)).collect();
        // The two parity sublattices of the walk can disagree by one step,
        // leaving single-node dips that would interpolate into point
        // barriers. Lift dips of at most one step to the lower neighbour.
        let mut r = raw.clone();
        for i in 1..raw.len().saturating_sub(1) {
            let floor = raw[i - 1].min(raw[i + 1]);
            if floor.is_finite() && floor > raw[i] && floor - raw[i] <= 1.5 * grid.dt {
                r[i] = floor;
            }
        }
        let mut mins = vec![r.clone()];
        let mut width = 1;
        while 2 * width <= r.len() {
            let prev = mins.last().expect("non-empty");
            let next: Vec<f64> = (0..=r.len() - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
            mins.push(next);
            width *= 2;
        }
        Self { dx: grid.dx, centre: grid.centre as f64, r, mins }
    }

    fn pos(&self, x: f64) -> f64 {
        (x / self.dx + self.centre).clamp(0.0, (self.r.len() - 1) as f64)
    }

    fn node_x(&self, i: usize) -> f64 {
        (i as f64 - self.centre) * self.dx
    }

    fn x_of(&self, pos: f64) -> f64 {
        (pos - self.centre) * self.dx
    }

    fn at(&self, x: f64) -> f64 {
        self.at_pos(self.pos(x))
    }

    fn at_pos(&self, pos: f64) -> f64 {
        let i = pos.floor() as usize;
        let theta = pos - i as f64;
        if theta == 0.0 || i + 1 >= self.r.len() {
            return self.r[i];
        }
        let (a, b) = (self.r[i], self.r[i + 1]);
        if a.is_finite() && b.is_finite() {
            a + (b - a) * theta
        } else {
            f64::INFINITY
        }
    }

    fn range(&self, lo: f64, hi: f64) -> (usize, usize) {
        (self.pos(lo).floor() as usize, self.pos(hi).ceil() as usize)
    }

    fn window_min(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        self.mins[k][lo].min(self.mins[k][hi + 1 - (1 << k)])
    }

    /// Closed components of `{x : r(x) ≤ t}` over nodes `lo..=hi`.
    fn components(&self, lo: usize, hi: usize, t: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let push = |a: f64, b: f64, out: &mut Vec<(f64, f64)>| match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        };
        if lo == hi {
            if self.r[lo] <= t {
                let x = self.node_x(lo);
                push(x, x, out);
            }
            return;
        }
        for i in lo..hi {
            let (a, b) = (self.r[i], self.r[i + 1]);
            let (xa, xb) = (self.node_x(i), self.node_x(i + 1));
            match (a.is_finite(), b.is_finite()) {
                (true, true) => match (a <= t, b <= t) {
                    (true, true) => push(xa, xb, out),
                    (true, false) => push(xa, xa + self.dx * (t - a) / (b - a), out),
                    (false, true) => push(xa + self.dx * (t - a) / (b - a), xb, out),
                    (false, false) => {}
                },
                (true, false) if a <= t => push(xa, xa, out),
                (false, true) if b <= t => push(xb, xb, out),
                _ => {}
            }
        }
    }
}

/// First point of the straight segment from `(t0, a)` to `(t0 + h, b)`
/// lying in `{(τ, y) : r(y) ≤ τ}`.
fn segment_entry(lookup: &Lookup, a: f64, b: f64, t0: f64, h: f64) -> Option<f64> {
    let (pa, pb) = (lookup.pos(a), lookup.pos(b));
    if pa == pb {
        return (lookup.at(b) <= t0 + h).then_some(b);
    }
    // Segment parameter of grid position `p`.
    let s_of = |p: f64| ((p - pa) / (pb - pa)).clamp(0.0, 1.0);
    let gap = |p: f64, s: f64| lookup.at_pos(p) - (t0 + s * h);
    let cells: Box<dyn Iterator<Item = usize>> = if pb > pa {
        Box::new(pa.floor() as usize..pb.ceil() as usize)
    } else {
        Box::new((pb.floor() as usize..pa.ceil() as usize).rev())
    };
    for i in cells {
        let (ra, rb) = (lookup.r[i], lookup.r[i + 1]);
        let (lo, hi) = (i as f64, (i + 1) as f64);
        // Portion of the cell covered by the segment, in travel order.
        let (p0, p1) = if pb > pa { (pa.max(lo), pb.min(hi)) } else { (pa.min(hi), pb.max(lo)) };
        match (ra.is_finite(), rb.is_finite()) {
            (true, true) => {
                let (s0, s1) = (s_of(p0), s_of(p1));
                let (g0, g1) = (gap(p0, s0), gap(p1, s1));
                if g0 <= 0.0 {
                    return Some(lookup.x_of(p0));
                }
                if g1 <= 0.0 {
                    let w = g0 / (g0 - g1);
                    return Some(lookup.x_of(p0 + w * (p1 - p0)));
                }
            }
            (false, false) => {}
            _ => {
                let node = if ra.is_finite() { lo } else { hi };
                let inside = (p0.min(p1)..=p0.max(p1)).contains(&node);
                if inside && lookup.r[node as usize] <= t0 + s_of(node) * h {
                    return Some(lookup.x_of(node));
                }
            }
        }
    }
    None
}

/// Whether the path moving from `a` to `b` over the step `(t0, t0 + h]` is
/// stopped, and where. The straight segment between the endpoints is
/// checked against the barrier surface, which opens points during the
/// step. Regions open for the whole step are also entered through
/// Brownian-bridge excursions beyond the endpoints.
fn step_hit<R: Rng>(
    lookup: &Lookup,
    a: f64,
    b: f64,
    t0: f64,
    h: f64,
    scratch: &mut Vec<(f64, f64)>,
    rng: &mut R,
) -> Option<f64> {
    let reach = 6.0 * h.sqrt();
    let (lo, hi) = lookup.range(a.min(b) - reach, a.max(b) + reach);
    let earliest = lookup.window_min(lo, hi);
    if earliest > t0 + h {
        return None;
    }
    let on_segment = segment_entry(lookup, a, b, t0, h);
    if earliest > t0 {
        return on_segment;
    }
    lookup.components(lo, hi, t0, scratch);
    let (top, bottom) = (a.max(b), a.min(b));
    let up = scratch.iter().find(|c| c.0 > top).map(|c| c.0);
    let down = scratch.iter().rev().find(|c| c.1 < bottom).map(|c| c.1);
    let p_up = up.map_or(0.0, |l| (-2.0 * (l - a) * (l - b) / h).exp());
    let p_down = down.map_or(0.0, |l| (-2.0 * (a - l) * (b - l) / h).exp());
    if p_up > 0.0 || p_down > 0.0 {
        // Drawn even when the segment is hit, to keep streams aligned
        // across barrier shapes.
        let u: f64 = rng.random();
        if on_segment.is_none() {
            if u < p_up {
                return up;
            }
            if u < p_up + p_down {
                return down;
            }
        }
    }
    on_segment
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct PathOutcome {
    x0: f64,
    sigma: Vec<f64>,
    stopped: Vec<f64>,
    probes: Vec<f64>,
    censored: bool,
}

fn steps_of(t: f64, h: f64, what: &str) -> Result<usize> {
    let k = (t / h).round();
    if (t / h - k).abs() > 1e-6 {
        return Err(Error::Domain(format!("{what} {t} is not a multiple of the simulation step {h}")));
    }
    Ok(k as usize)
}

/// Root stopping times `σ_j = inf{t ≥ σ_{j-1} : (t, B_t) ∈ R_j}` for paths
/// started from `μ₀`. Each path draws from its own counter-based stream.
pub fn simulate_root(family: &MarginalFamily, barriers: &BarrierFamily, opts: &SimOptions) -> Result<PathEnsemble> {
    let grid: &SpaceTimeGrid = barriers.grid();
    let h = opts.h_sim;
    if !(h > 0.0) || h > grid.dt * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("simulation step {h} must lie in (0, Δt = {}]", grid.dt)));
    }
    if opts.paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    let n = barriers.len();
    let law0 = family.law(0.0)?;
    let lookups: Vec<Lookup> = (1..=n).map(|j| Lookup::new(barriers, j)).collect();
    let max_steps = (grid.horizon() / h - 1e-9).ceil() as usize;
    let probe_steps: Vec<usize> =
        opts.probe_times.iter().map(|&t| steps_of(t, h, "probe time")).collect::<Result<_>>()?;
    let sqrt_h = h.sqrt();

    let run = |p: usize| -> PathOutcome {
        let mut rng = path_rng(opts.seed, p as u64);
        let x0 = law0.sample(&mut rng);
        let mut x = x0;
        let mut sigma = Vec::with_capacity(n);
        let mut stopped = Vec::with_capacity(n);
        let mut probes = vec![f64::NAN; probe_steps.len()];
        let mut scratch = Vec::new();
        let mut k = 0usize;
        let mut t = 0.0;
        while sigma.len() < n && lookups[sigma.len()].at(x) <= 0.0 {
            sigma.push(0.0);
            stopped.push(x);
        }
        while sigma.len() < n && k < max_steps {
            let z: f64 = rng.sample(StandardNormal);
            let b = x + sqrt_h * z;
            let t0 = t;
            k += 1;
            t = k as f64 * h;
            match step_hit(&lookups[sigma.len()], x, b, t0, h, &mut scratch, &mut rng) {
                Some(v) => {
                    x = v;
                    sigma.push(t);
                    stopped.push(v);
                    while sigma.len() < n && lookups[sigma.len()].at(x) <= t {
                        sigma.push(t);
                        stopped.push(x);
                    }
                }
                None => x = b,
            }
            for (q, &ks) in probe_steps.iter().enumerate() {
                if ks == k {
                    probes[q] = x;
                }
            }
        }
        let censored = sigma.len() < n;
        while sigma.len() < n {
            sigma.push(t.max(grid.horizon()));
            stopped.push(x);
        }
        for (q, &ks) in probe_steps.iter().enumerate() {
            if ks > k || ks == 0 {
                probes[q] = if ks == 0 { x0 } else { x };
            }
        }
        PathOutcome { x0, sigma, stopped, probes, censored }
    };

    let outcomes: Vec<PathOutcome> = (0..opts.paths).into_par_iter().map(run).collect();
    assemble(outcomes, n, opts, grid.horizon(), 0.5 * grid.dx)
}

fn assemble(
    outcomes: Vec<PathOutcome>,
    n: usize,
    opts: &SimOptions,
    horizon: f64,
    atom_window: f64,
) -> Result<PathEnsemble> {
    let censored = outcomes.iter().filter(|o| o.censored).count();
    if censored as f64 > MAX_CENSORED_FRACTION * opts.paths as f64 {
        return Err(Error::Horizon { censored, paths: opts.paths, horizon });
    }
    let mut ens = PathEnsemble {
        paths: opts.paths,
        layers: n,
        h_sim: opts.h_sim,
        seed: opts.seed,
        horizon,
        probe_times: opts.probe_times.clone(),
        censored,
        atom_window,
        x0: Vec::with_capacity(opts.paths),
        sigma: Vec::with_capacity(opts.paths * n),
        stopped: Vec::with_capacity(opts.paths * n),
        probes: Vec::with_capacity(opts.paths * opts.probe_times.len()),
    };
    for o in outcomes {
        ens.x0.push(o.x0);
        ens.sigma.extend(o.sigma);
        ens.stopped.extend(o.stopped);
        ens.probes.extend(o.probes);
    }
    Ok(ens)
}

/// Comparison embedding of `N(0,1)` from `0`: draw `G ~ N(0,1)` and stop
/// when `|B|` first reaches `|G|`.
pub fn alternative_embedding(paths: usize, h_sim: f64, seed: u64, horizon: f64) -> Result<PathEnsemble> {
    let sqrt_h = h_sim.sqrt();
    let max_steps = (horizon / h_sim).floor() as usize;
    let run = |p: usize| -> PathOutcome {
        let mut rng = path_rng(seed, ALTERNATIVE_STREAMS + p as u64);
        let g: f64 = rng.sample(StandardNormal);
        let level = g.abs();
        let mut x = 0.0_f64;
        let mut k = 0;
        let mut hit = None;
        while hit.is_none() && k < max_steps {
            let z: f64 = rng.sample(StandardNormal);
            let b = x + sqrt_h * z;
            k += 1;
            if b.abs() >= level {
                hit = Some(level.copysign(b));
            } else {
                let p_up = (-2.0 * (level - x) * (level - b) / h_sim).exp();
                let p_down = (-2.0 * (level + x) * (level + b) / h_sim).exp();
                let u: f64 = rng.random();
                if u < p_up {
                    hit = Some(level);
                } else if u < p_up + p_down {
                    hit = Some(-level);
                }
            }
            x = b;
        }
        let t = k as f64 * h_sim;
        PathOutcome {
            x0: 0.0,
            sigma: vec![t],
            stopped: vec![hit.unwrap_or(x)],
            probes: Vec::new(),
            censored: hit.is_none(),
        }
    };
    let outcomes: Vec<PathOutcome> = (0..paths).into_par_iter().map(run).collect();
    let opts = SimOptions { paths, h_sim, seed, probe_times: Vec::new() };
    assemble(outcomes, 1, &opts, horizon, 0.0)
}

/// `-E|B_{t ∧ σ_j} - x|` per probe `x`.
pub fn empirical_potential(ens: &PathEnsemble, j: usize, t: f64, xs: &[f64]) -> Result<Vec<Estimate>> {
    let values = ens.stopped_at(j, t)?;
    Ok(xs
        .iter()
        .map(|&x| {
            let v: Vec<f64> = values.iter().map(|b| -(b - x).abs()).collect();
            Estimate::from_samples(&v)
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomFit {
    pub position: f64,
    pub expected: f64,
    pub observed: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalFit {
    pub j: usize,
    pub s: f64,
    pub samples: usize,
    pub continuous: bool,
    pub ks: f64,
    pub atoms: Vec<AtomFit>,
    /// `sup_x |-E|B_{σ_j} - x| - U(s_j, x)|` over the probes.
    pub potential_distance: f64,
    /// Stderr of the empirical potential at the worst probe.
    pub potential_stderr: f64,
}

/// Stopped law of each layer against `μ_{s_j}`.
pub fn marginal_fit(
    ens: &PathEnsemble,
    family: &MarginalFamily,
    s_points: &[f64],
    xs: &[f64],
) -> Result<Vec<MarginalFit>> {
    (1..=ens.layers)
        .map(|j| {
            let s = s_points[j];
            let law: Law = family.law(s)?;
            let values = ens.stopped(j);
            let ks = ks_statistic(&values, |x| law.cdf(x));
            let atoms = law
                .atoms()
                .into_iter()
                .map(|(position, expected)| {
                    let hits = values.iter().filter(|&&v| (v - position).abs() <= ens.atom_window + 1e-9).count();
                    AtomFit { position, expected, observed: hits as f64 / values.len() as f64 }
                })
                .collect();
            let mut potential_distance: f64 = 0.0;
            let mut potential_stderr = 0.0;
            for (&x, est) in xs.iter().zip(empirical_potential(ens, j, f64::INFINITY, xs)?) {
                let d = (est.mean - family.potential(s, x)?).abs();
                if d > potential_distance {
                    potential_distance = d;
                    potential_stderr = est.stderr;
                }
            }
            Ok(MarginalFit {
                j,
                s,
                samples: values.len(),
                continuous: law.is_continuous(),
                ks,
                atoms,
                potential_distance,
                potential_stderr,
            })
        })
        .collect()
}

/// `E ∫_0^{σ_n} f(t) dt`.
pub fn optimality_functional(ens: &PathEnsemble, f: &PiecewisePoly) -> Estimate {
    let v: Vec<f64> = ens.sigma(ens.layers).iter().map(|&s| f.integral(s)).collect();
    Estimate::from_samples(&v)
}

/// Stopping rules fed to [`lower_bound_mc`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HeuristicRule {
    StopImmediately,
    StopAtHorizon,
    BarrierHitting,
}

/// Payoff of a stopping rule for the layered problem on the `±Δx` walk of
/// the solver grid, started at layer `j`, time index `m`, node `i`. Each
/// stop in phase `ℓ` collects `ΔU_ℓ` unless no time is left; the path then
/// continues in phase `ℓ - 1`, and ends paying `U(0, ·)`. The grid edge
/// stops every rule.
pub fn lower_bound_mc(
    surface: &ValueSurface,
    barriers: &BarrierFamily,
    rule: HeuristicRule,
    (j, m, i): (usize, usize, usize),
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    let grid = surface.grid();
    if j == 0 || j >= surface.layers() || m > grid.steps || i >= grid.nx() {
        return Err(Error::Domain(format!("start ({j}, {m}, {i}) outside the surface")));
    }
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let last = grid.nx() - 1;
    let u0 = |i: usize| surface.value(0, 0, i).expect("row 0 is stored");
    let payoff = |p: usize| -> f64 {
        let mut rng = path_rng(seed, p as u64);
        let (mut phase, mut left, mut node) = (j, m, i);
        let mut total = 0.0;
        loop {
            let stop = left == 0
                || node == 0
                || node == last
                || match rule {
                    HeuristicRule::StopImmediately => true,
                    HeuristicRule::StopAtHorizon => false,
                    HeuristicRule::BarrierHitting => barriers.is_stopped(phase, left, node),
                };
            if stop {
                if left > 0 {
                    total += surface.increment(phase, node);
                }
                phase -= 1;
                if phase == 0 {
                    return total + u0(node);
                }
                continue;
            }
            node = if rng.random::<bool>() { node + 1 } else { node - 1 };
            left -= 1;
        }
    };
    let v: Vec<f64> = (0..samples).into_par_iter().map(payoff).collect();
    Ok(Estimate::from_samples(&v))
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityRow {
    pub delta: f64,
    pub cells: usize,
    /// `E[σ_s - σ_{s-δ}]`.
    pub gap: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub s: f64,
    pub rows: Vec<ContinuityRow>,
    /// Each gap is at most the previous one plus three combined stderrs.
    pub decreasing: bool,
}

/// Mean gap between consecutive Root stopping times ending at `s`, on
/// uniform partitions of mesh `δ` (each `δ` must divide `s` and `1`).
pub fn continuity_check(
    family: &MarginalFamily,
    grid: &SpaceTimeGrid,
    s: f64,
    deltas: &[f64],
    tolerances: &Tolerances,
    sim: &SimOptions,
) -> Result<ContinuityReport> {
    let solve_opts = SolveOptions { record_every: grid.steps.max(1), barrier_threshold: tolerances.barrier(grid) };
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let cells = (1.0 / delta).round() as usize;
        let j = (s / delta).round() as usize;
        if cells == 0 || (cells as f64 * delta - 1.0).abs() > 1e-9 || j == 0 || (j as f64 * delta - s).abs() > 1e-9 {
            return Err(Error::Domain(format!("mesh {delta} does not divide [0, {s}] and [0, 1]")));
        }
        let partition = make_partition(cells, PartitionStyle::Uniform)?;
        let surface = solve_layers(family, &partition, grid, &solve_opts)?;
        let barriers = extract(&surface)?;
        let ens = simulate_root(family, &barriers, &SimOptions { probe_times: Vec::new(), ..sim.clone() })?;
        let gaps: Vec<f64> =
            (0..ens.paths).map(|p| ens.path_sigma(p, j) - if j > 1 { ens.path_sigma(p, j - 1) } else { 0.0 }).collect();
        rows.push(ContinuityRow { delta, cells, gap: Estimate::from_samples(&gaps) });
    }
    let decreasing = rows.windows(2).all(|w| {
        let slack = 3.0 * w[0].gap.stderr.hypot(w[1].gap.stderr);
        w[1].gap.mean <= w[0].gap.mean + slack
    });
    Ok(ContinuityReport { s, rows, decreasing })
}
