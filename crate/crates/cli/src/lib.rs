//! Config-driven runner: `solve`, `limit`, `verify` and `all` write CSV and
//! JSON artifacts plus a hash manifest into one output directory.
//!
//! Exit codes: 0 pass, 1 usage or config error, 2 check failure.

pub mod config;

use clap::{Args, Parser, Subcommand};
use config::{ConfigError, RunConfig};
use rootbarrier::{
    alternative_embedding, bounds_check, complementarity_check, empirical_potential, extract, lower_bound_mc,
    make_grid, make_partition, marginal_fit, optimality_functional, ordering_check, partition_independence,
    pde_residual, regularity_report, simulate_root, solve_layers, solve_limit, BarrierFamily, Error, Estimate,
    HeuristicRule, LimitOptions, LimitSurface, MarginalFamily, PartitionStyle, SimOptions, SolveOptions, SpaceTimeGrid,
    ValueSurface,
};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

/// Row cap for `--dump-raw`.
pub const MAX_RAW_ROWS: usize = 5_000_000;

#[derive(Parser, Debug)]
#[command(name = "rootbarrier", version, about = "Root barriers for multi-marginal Skorokhod embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Layered solve, barrier extraction, complementarity check.
    Solve(Common),
    /// Partition refinement with residual, bounds, regularity and independence checks.
    Limit(Common),
    /// Monte Carlo verification of the embedding.
    Verify(Common),
    /// `solve`, `limit` and `verify` into one directory.
    All(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write per-path stopping times and values.
    #[arg(long)]
    dump_raw: bool,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } | Error::ExtractionUnstable { .. } | Error::Horizon { .. } => {
                Failure::Check(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("io: {e}"))
    }
}

type Outcome<T> = Result<T, Failure>;

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (Command::Solve(common) | Command::Limit(common) | Command::Verify(common) | Command::All(common)) =
        &cli.command;
    let result = match common.threads {
        Some(0) => Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, common)),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        None => dispatch(&cli.command, common),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            2
        }
    }
}

fn dispatch(command: &Command, common: &Common) -> Outcome<()> {
    let cfg = RunConfig::load(&common.config)?;
    cfg.validate()?;
    let mut out = Artifacts::create(common.out.clone())?;
    out.text("config.toml", cfg.to_toml())?;
    let family = cfg.family()?;
    let grid = make_grid(&family, cfg.grid.horizon, cfg.grid.dx, cfg.grid.node_budget)?;
    let mut failures = Vec::new();
    let name = match command {
        Command::Solve(_) => {
            failures.extend(cmd_solve(&cfg, &family, &grid, &mut out)?);
            "solve"
        }
        Command::Limit(_) => {
            failures.extend(cmd_limit(&cfg, &family, &grid, &mut out)?);
            "limit"
        }
        Command::Verify(_) => {
            failures.extend(cmd_verify(&cfg, &family, &grid, common.dump_raw, &mut out)?);
            "verify"
        }
        Command::All(_) => {
            failures.extend(cmd_solve(&cfg, &family, &grid, &mut out)?);
            failures.extend(cmd_limit(&cfg, &family, &grid, &mut out)?);
            failures.extend(cmd_verify(&cfg, &family, &grid, common.dump_raw, &mut out)?);
            "all"
        }
    };
    out.manifest(name)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}

/// Files written so far, their hashes, and stage runtimes.
struct Artifacts {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
    runtimes: BTreeMap<String, Value>,
}

impl Artifacts {
    fn create(dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, hashes: BTreeMap::new(), runtimes: BTreeMap::new() })
    }

    fn text(&mut self, name: &str, body: String) -> std::io::Result<()> {
        self.hashes.insert(name.to_owned(), hex::encode(Sha256::digest(body.as_bytes())));
        std::fs::write(self.dir.join(name), body)
    }

    /// Writes pretty JSON with every `runtime_ms` moved into the manifest,
    /// so the file itself is reproducible.
    fn json(&mut self, name: &str, value: Value) -> std::io::Result<()> {
        let mut value = value;
        let mut times = Vec::new();
        strip_runtimes(&mut value, &mut times);
        if !times.is_empty() {
            self.runtimes.insert(name.to_owned(), Value::from(times));
        }
        let mut body = serde_json::to_string_pretty(&value).expect("json values serialise");
        body.push('\n');
        self.text(name, body)
    }

    fn runtime(&mut self, stage: &str, start: Instant) {
        self.runtimes.insert(stage.to_owned(), Value::from(start.elapsed().as_millis() as u64));
    }

    fn manifest(&mut self, command: &str) -> std::io::Result<()> {
        let body = json!({
            "command": command,
            "versions": {
                "rootbarrier": rootbarrier::VERSION,
                "rootbarrier-cli": env!("CARGO_PKG_VERSION"),
            },
            "sha256": self.hashes,
            "runtime_ms": self.runtimes,
        });
        let text = serde_json::to_string_pretty(&body).expect("json values serialise") + "\n";
        std::fs::write(self.dir.join("manifest.json"), text)
    }
}

fn strip_runtimes(v: &mut Value, into: &mut Vec<Value>) {
    match v {
        Value::Object(map) => {
            if let Some(t) = map.remove("runtime_ms") {
                into.push(t);
            }
            map.values_mut().for_each(|c| strip_runtimes(c, into));
        }
        Value::Array(items) => items.iter_mut().for_each(|c| strip_runtimes(c, into)),
        _ => {}
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialise")
}

/// `f64` for CSV cells; infinite barrier times print as `inf`.
fn cell(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

fn on_x_stride(grid: &SpaceTimeGrid, i: usize, stride: usize) -> bool {
    (i as i64 - grid.centre as i64).rem_euclid(stride as i64) == 0
}

fn solve_surface(
    cfg: &RunConfig,
    family: &MarginalFamily,
    grid: &SpaceTimeGrid,
    record_every: usize,
) -> Outcome<(ValueSurface, BarrierFamily)> {
    let partition = make_partition(cfg.partition.n, cfg.partition.style)?;
    let opts = SolveOptions { record_every, barrier_threshold: cfg.tolerances.barrier(grid) };
    let surface = solve_layers(family, &partition, grid, &opts)?;
    let barriers = extract(&surface)?;
    Ok((surface, barriers))
}

fn cmd_solve(
    cfg: &RunConfig,
    family: &MarginalFamily,
    grid: &SpaceTimeGrid,
    out: &mut Artifacts,
) -> Outcome<Vec<String>> {
    let start = Instant::now();
    let (surface, barriers) = solve_surface(cfg, family, grid, cfg.record_every(grid))?;
    let comp = complementarity_check(&surface, cfg.tolerances.scheme(grid));
    let ordering = ordering_check(&barriers);
    out.runtime("solve", start);

    let s = surface.partition().points();
    let stride = cfg.partition.x_stride;
    let mut csv = String::from("j,s,t,x,u,obstacle_gap\n");
    for &m in surface.main_rows() {
        for (j, &sj) in s.iter().enumerate() {
            let row = surface.row(m, j).expect("main row stored");
            for (i, &u) in row.iter().enumerate().filter(|(i, _)| on_x_stride(grid, *i, stride)) {
                let gap = surface.obstacle_gap(j, m, i).map(cell).unwrap_or_default();
                let _ = writeln!(csv, "{j},{sj},{},{},{},{gap}", grid.t(m), grid.x(i), u);
            }
        }
    }
    out.text("surface.csv", csv)?;

    let mut csv = String::from("j,s,x,r\n");
    for j in 1..s.len() {
        for i in 0..grid.nx() {
            let _ = writeln!(csv, "{j},{},{},{}", s[j], grid.x(i), cell(barriers.r(j, i)));
        }
    }
    out.text("barriers.csv", csv)?;

    let layers: Vec<Value> = (1..s.len())
        .map(|j| {
            let l = barriers.layer(j);
            json!({ "j": j, "s": l.s, "flagged": l.flagged, "region": l.region })
        })
        .collect();
    out.json(
        "solve.json",
        json!({
            "family": to_value(&cfg.family),
            "grid": to_value(grid),
            "partition": to_value(surface.partition()),
            "tolerances": to_value(&cfg.tolerances),
            "barrier_threshold": barriers.threshold(),
            "boundary_error_bound": 1e-6 * grid.half_width(),
            "complementarity": to_value(&comp),
            "ordering": to_value(&ordering),
            "extraction": layers,
        }),
    )?;
    println!(
        "solve: {} layers, complementarity max {:.3e} (tol {:.3e}) {}, barriers ordered: {}",
        s.len() - 1,
        comp.max_violation,
        comp.tolerance,
        if comp.pass { "pass" } else { "FAIL" },
        ordering.ordered
    );
    let mut failures = Vec::new();
    if !comp.pass {
        eprintln!("{}", serde_json::to_string_pretty(&comp).expect("serialise"));
        failures.push(format!("complementarity residual {:e} above {:e}", comp.max_violation, comp.tolerance));
    }
    Ok(failures)
}

fn limit_options(cfg: &RunConfig, grid: &SpaceTimeGrid, style: PartitionStyle) -> LimitOptions {
    let p = &cfg.partition;
    LimitOptions {
        n0: p.n0,
        levels: p.levels,
        style,
        record_every: cfg.record_every(grid),
        x_stride: p.x_stride,
        reach: p.reach,
        s_cells: p.s_cells,
        tolerances: cfg.tolerances,
    }
}

fn limit_csv(limit: &LimitSurface) -> String {
    let mut csv = String::from("s,t,x,u,level\n");
    let level = limit.level_count() - 1;
    for (a, s) in limit.s_nodes.iter().enumerate() {
        for b in 0..limit.t_index.len() {
            for c in 0..limit.x_index.len() {
                let _ = writeln!(csv, "{s},{},{},{},{level}", limit.t(b), limit.x(c), limit.at(a, b, c));
            }
        }
    }
    csv
}

fn cmd_limit(
    cfg: &RunConfig,
    family: &MarginalFamily,
    grid: &SpaceTimeGrid,
    out: &mut Artifacts,
) -> Outcome<Vec<String>> {
    let start = Instant::now();
    let styles = &cfg.partition.styles;
    let both = styles.contains(&PartitionStyle::Uniform) && styles.contains(&PartitionStyle::Geometric);
    let (limit, independence, other) = if both {
        let (rep, uni, geo) = partition_independence(family, grid, &limit_options(cfg, grid, PartitionStyle::Uniform))?;
        (uni, Some(rep), Some(geo))
    } else {
        (solve_limit(family, grid, &limit_options(cfg, grid, styles[0]))?, None, None)
    };
    let tol = &cfg.tolerances;
    let residual = pde_residual(&limit, family, tol)?;
    let bounds = bounds_check(&limit, family, residual.tolerance)?;
    let regularity = regularity_report(&limit);
    out.runtime("limit", start);

    out.text("limit.csv", limit_csv(&limit))?;
    if let Some(geo) = &other {
        out.text("limit_geometric.csv", limit_csv(geo))?;
    }
    let t_ratio_bound = 1.0 + tol.scheme(grid);
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    check(residual.pass, format!("pde residual {:e} above {:e}", residual.max_abs, residual.tolerance));
    check(bounds.pass_smoothed, format!("smoothed bounds: {} violations", bounds.smoothed_lower.violations));
    check(regularity.x_ratio <= 1.0 + 1e-6, format!("x-Lipschitz ratio {}", regularity.x_ratio));
    check(regularity.t_ratio <= t_ratio_bound, format!("t-Hölder ratio {}", regularity.t_ratio));
    check(regularity.s_increment_max <= 1e-9, format!("s-increment {:e}", regularity.s_increment_max));
    if let Some(r) = regularity.envelope_ratio {
        check(r <= 1.0 + 1e-9, format!("envelope ratio {r}"));
    }
    if let Some(ind) = &independence {
        check(ind.within_bound, format!("partition independence {:e} above {:e}", ind.distance, ind.bound));
    }
    let gating = !limit.outside_assumptions;
    out.json(
        "convergence.json",
        json!({
            "style": to_value(&limit.style),
            "levels": limit.level_count(),
            "history": to_value(&limit.history),
            "assumptions": to_value(&limit.assumptions),
            "outside_assumptions": limit.outside_assumptions,
            "residual": to_value(&residual),
            "bounds": to_value(&bounds),
            "regularity": to_value(&regularity),
            "t_ratio_bound": t_ratio_bound,
            "independence": independence.as_ref().map(to_value),
            "geometric_history": other.as_ref().map(|g| to_value(&g.history)),
            "checks_gating": gating,
            "failed_checks": failures,
        }),
    )?;
    let diffs: Vec<String> = limit.history.iter().filter_map(|h| h.cauchy_diff).map(|d| format!("{d:.3e}")).collect();
    println!(
        "limit: {} levels, Cauchy differences [{}], residual {:.3e} (tol {:.3e}), literal bounds {}{}",
        limit.level_count(),
        diffs.join(", "),
        residual.max_abs,
        residual.tolerance,
        if bounds.pass { "hold" } else { "violated" },
        if gating { "" } else { ", outside standing assumptions (checks reported only)" }
    );
    Ok(if gating { failures } else { Vec::new() })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn cmd_verify(
    cfg: &RunConfig,
    family: &MarginalFamily,
    grid: &SpaceTimeGrid,
    dump_raw: bool,
    out: &mut Artifacts,
) -> Outcome<Vec<String>> {
    let sim = &cfg.simulation;
    if sim.skip_mc {
        println!("verify: skipped (simulation.skip_mc)");
        return Ok(Vec::new());
    }
    let probe_steps: Vec<usize> = sim
        .probe_times
        .iter()
        .map(|&t| grid.time_index(t).ok_or_else(|| Failure::Usage(format!("probe time {t} is not a grid time"))))
        .collect::<Outcome<_>>()?;
    let every = probe_steps.iter().fold(cfg.record_every(grid), |g, &m| gcd(g, m));
    let (surface, barriers) = solve_surface(cfg, family, grid, every)?;
    let h_sim = cfg.h_sim(grid);
    if dump_raw && sim.paths.saturating_mul(barriers.len()) > MAX_RAW_ROWS {
        return Err(Failure::Usage(format!("--dump-raw limited to {MAX_RAW_ROWS} rows")));
    }

    let start = Instant::now();
    let opts = SimOptions { paths: sim.paths, h_sim, seed: sim.seed, probe_times: sim.probe_times.clone() };
    let ens = simulate_root(family, &barriers, &opts)?;
    out.runtime("simulate", start);
    let n = barriers.len();
    let s = surface.partition().points();
    let mut failures = Vec::new();

    let slack = 2.0 * h_sim.sqrt();
    let mut representation = Vec::new();
    let mut layers = vec![1, n];
    layers.dedup();
    for &j in &layers {
        for (&t, &m) in sim.probe_times.iter().zip(&probe_steps) {
            for &x in &sim.probe_x {
                let est = empirical_potential(&ens, j, t, &[x])?[0];
                let solver = surface.value(j, m, grid.nearest_x(x)).expect("probe row stored");
                let ok = est.agrees_with(solver, 3.0, slack);
                if !ok {
                    failures.push(format!("representation at j={j} t={t} x={x}: {} vs {solver}", est.mean));
                }
                representation
                    .push(json!({ "j": j, "t": t, "x": x, "mc": to_value(&est), "solver": solver, "pass": ok }));
            }
        }
    }

    let fits = marginal_fit(&ens, family, s, &sim.probe_x)?;
    for f in &fits {
        if f.continuous && f.ks > 0.01 {
            failures.push(format!("KS statistic {} on layer {}", f.ks, f.j));
        }
        for a in &f.atoms {
            if (a.observed - a.expected).abs() > 0.01 {
                failures
                    .push(format!("atom mass at {} on layer {}: {} vs {}", a.position, f.j, a.observed, a.expected));
            }
        }
        if f.potential_distance > 0.02 {
            failures.push(format!("potential distance {} on layer {}", f.potential_distance, f.j));
        }
    }

    // Mass escaping to infinity would show up as E|B_σ| below the target's.
    let abs: Vec<f64> = ens.stopped(n).iter().map(|v| v.abs()).collect();
    let abs = Estimate::from_samples(&abs);
    let target = family.law(1.0)?.mean_abs();
    let ui_ok = abs.agrees_with(target, 3.0, grid.dx);
    if !ui_ok {
        failures.push(format!("E|B_sigma| {} vs {target}", abs.mean));
    }

    let rates: Vec<_> = sim.rates.iter().map(|r| cfg.rate(r).map(|p| (r.name.clone(), p))).collect::<Result<_, _>>()?;
    let root: Vec<Estimate> = rates.iter().map(|(_, f)| optimality_functional(&ens, f)).collect();
    let alternative = if sim.alternative {
        let start = Instant::now();
        let alt = alternative_embedding(sim.paths, h_sim, sim.seed, sim.alternative_horizon)?;
        out.runtime("alternative", start);
        let vals: Vec<Estimate> = rates.iter().map(|(_, f)| optimality_functional(&alt, f)).collect();
        for ((name, _), (a, b)) in rates.iter().zip(root.iter().zip(&vals)) {
            if a.mean > b.mean {
                failures.push(format!("Root functional for {name} exceeds the alternative: {} > {}", a.mean, b.mean));
            }
        }
        Some(vals)
    } else {
        None
    };
    let functionals: Vec<Value> = rates
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            json!({
                "rate": name,
                "root": to_value(&root[k]),
                "alternative": alternative.as_ref().map(|v| to_value(&v[k])),
            })
        })
        .collect();

    let centre = grid.nearest_x(0.0);
    let m = probe_steps.first().copied().unwrap_or(0);
    let mut heuristics = Vec::new();
    if m > 0 {
        let node = (n, m, centre);
        for (k, rule) in [HeuristicRule::StopImmediately, HeuristicRule::StopAtHorizon, HeuristicRule::BarrierHitting]
            .into_iter()
            .enumerate()
        {
            let est = lower_bound_mc(&surface, &barriers, rule, node, 10_000, sim.seed.wrapping_add(k as u64))?;
            heuristics.push(json!({ "rule": to_value(&rule), "estimate": to_value(&est) }));
        }
    }

    out.json(
        "embedding.json",
        json!({
            "paths": ens.paths,
            "h_sim": h_sim,
            "seed": ens.seed,
            "horizon": ens.horizon,
            "censored": ens.censored,
            "atom_window": ens.atom_window,
            "representation": representation,
            "marginals": to_value(&fits),
            "ui_proxy": { "mean_abs": to_value(&abs), "target": target, "pass": ui_ok },
            "functionals": functionals,
            "lower_bounds": {
                "start": { "j": n, "t": grid.t(m), "x": grid.x(centre) },
                "value": surface.value(n, m, centre),
                "rules": heuristics,
            },
            "failed_checks": failures,
        }),
    )?;

    if dump_raw {
        let mut csv = String::from("path,j,sigma,b_sigma\n");
        for p in 0..ens.paths {
            for j in 1..=n {
                let _ = writeln!(csv, "{p},{j},{},{}", ens.path_sigma(p, j), ens.path_stopped(p, j));
            }
        }
        out.text("paths.csv", csv)?;
    }

    let fmt: Vec<String> = rates
        .iter()
        .enumerate()
        .map(|(k, (name, _))| match &alternative {
            Some(v) => format!("{name}: root {:.4} vs alternative {:.4} ± {:.4}", root[k].mean, v[k].mean, v[k].stderr),
            None => format!("{name}: root {:.4} ± {:.4}", root[k].mean, root[k].stderr),
        })
        .collect();
    println!("verify: {} paths, {} censored; {}", ens.paths, ens.censored, fmt.join("; "));
    Ok(failures)
}
