//! Run configuration: one TOML document with `[family]`, `[grid]`,
//! `[partition]`, `[simulation]` and `[tolerances]` sections.

use rootbarrier::{
    AtomicMeasure, BaseLaw, Growth, MarginalFamily, PartitionStyle, PiecewisePoly, SpaceTimeGrid, Tolerances,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    GaussianShift,
    ScaledBase,
    ThreePoint,
    TwoAtom,
    Constant,
    AtomicTable,
    Pathological,
}

/// Flat family descriptor; which keys are allowed depends on `kind`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: Option<Kind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// `"normal"` or `"atoms"` for the scaled kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    /// `[position, weight]` pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    /// CSV table, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// `"power"` or `"exponential"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<usize>,
    #[serde(default)]
    pub reversed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Path-time horizon `T`.
    pub horizon: f64,
    /// Space step; the time step is `dx²`.
    pub dx: f64,
    #[serde(default = "default_budget")]
    pub node_budget: u64,
}

fn default_budget() -> u64 {
    rootbarrier::grid::DEFAULT_NODE_BUDGET
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    /// Gaps of the partition used by `solve` and `verify`.
    pub n: usize,
    pub style: PartitionStyle,
    /// Coarsest gap count of the refinement sequence.
    pub n0: usize,
    pub levels: usize,
    /// Refinement styles run by `limit`; both styles also compare them.
    pub styles: Vec<PartitionStyle>,
    /// Stored time rows, in grid steps; `0` picks about 50 rows.
    pub record_every: usize,
    pub x_stride: usize,
    pub reach: f64,
    pub s_cells: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            n: 4,
            style: PartitionStyle::Uniform,
            n0: 4,
            levels: 4,
            styles: vec![PartitionStyle::Uniform],
            record_every: 0,
            x_stride: 5,
            reach: 4.0,
            s_cells: 32,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub name: String,
    pub breaks: Vec<f64>,
    /// Ascending power coefficients per piece.
    pub coeffs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub paths: usize,
    /// Simulation step; `0` means the solver time step.
    pub h_sim: f64,
    pub seed: u64,
    pub probe_times: Vec<f64>,
    pub probe_x: Vec<f64>,
    /// Also run the randomised comparison embedding of `N(0, 1)`.
    pub alternative: bool,
    pub alternative_horizon: f64,
    pub skip_mc: bool,
    pub rates: Vec<RateConfig>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            h_sim: 0.0,
            seed: 1,
            probe_times: vec![0.25, 0.5, 1.0],
            probe_x: vec![-1.0, 0.0, 1.0],
            alternative: false,
            alternative_horizon: 100.0,
            skip_mc: false,
            rates: vec![RateConfig { name: "t".into(), breaks: vec![0.0], coeffs: vec![vec![0.0, 1.0]] }],
        }
    }
}

/// A configuration problem; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown field") {
                ConfigError(format!("unknown key: {msg}"))
            } else {
                ConfigError(msg)
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(p) = &cfg.family.path {
            if p.is_relative() {
                cfg.family.path = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialise")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.horizon > 0.0 && g.horizon.is_finite()) || !(g.dx > 0.0 && g.dx.is_finite()) {
            return bad("grid.horizon and grid.dx must be positive");
        }
        let p = &self.partition;
        if p.n == 0 || p.n0 == 0 || p.levels < 2 || p.x_stride == 0 || p.s_cells == 0 || p.styles.is_empty() {
            return bad("partition.n, n0, x_stride, s_cells must be positive, levels ≥ 2, styles non-empty");
        }
        let s = &self.simulation;
        if s.paths == 0 || s.h_sim < 0.0 || !(s.alternative_horizon > 0.0) {
            return bad("simulation.paths must be positive and h_sim non-negative");
        }
        if s.probe_times.iter().any(|&t| !(t > 0.0 && t <= g.horizon)) {
            return bad("simulation.probe_times must lie in (0, horizon]");
        }
        for r in &s.rates {
            self.rate(r)?;
        }
        if s.alternative && !self.targets_standard_normal() {
            return bad("simulation.alternative needs a family from δ₀ to N(0, 1): kind = \"scaled_base\", s0 = 0, base = \"normal\"");
        }
        self.family()?;
        Ok(())
    }

    fn targets_standard_normal(&self) -> bool {
        let f = &self.family;
        f.kind == Some(Kind::ScaledBase) && f.s0 == Some(0.0) && f.base.as_deref() == Some("normal") && !f.reversed
    }

    pub fn rate(&self, r: &RateConfig) -> Result<PiecewisePoly, ConfigError> {
        PiecewisePoly::new(r.breaks.clone(), r.coeffs.clone()).map_err(|e| ConfigError(format!("rate {}: {e}", r.name)))
    }

    pub fn family(&self) -> Result<MarginalFamily, ConfigError> {
        let f = &self.family;
        let Some(kind) = f.kind else { return bad("family.kind is required") };
        let allowed: &[&str] = match kind {
            Kind::GaussianShift => &["t0"],
            Kind::ScaledBase => &["s0", "base", "atoms"],
            Kind::ThreePoint => &["p0", "p1"],
            Kind::TwoAtom => &[],
            Kind::Constant => &["atoms"],
            Kind::AtomicTable => &["path"],
            Kind::Pathological => &["growth", "exponent", "rate", "pieces"],
        };
        let present = [
            ("t0", f.t0.is_some()),
            ("s0", f.s0.is_some()),
            ("base", f.base.is_some()),
            ("atoms", f.atoms.is_some()),
            ("p0", f.p0.is_some()),
            ("p1", f.p1.is_some()),
            ("path", f.path.is_some()),
            ("growth", f.growth.is_some()),
            ("exponent", f.exponent.is_some()),
            ("rate", f.rate.is_some()),
            ("pieces", f.pieces.is_some()),
        ];
        if let Some((key, _)) = present.iter().find(|(k, on)| *on && !allowed.contains(k)) {
            return bad(format!("unknown key: family.{key} does not apply to this kind"));
        }
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError(format!("family.{key} is required")));
        let atoms = || -> Result<AtomicMeasure, ConfigError> {
            let list = f.atoms.as_ref().ok_or_else(|| ConfigError("family.atoms is required".into()))?;
            let pairs: Vec<(f64, f64)> = list.iter().map(|a| (a[0], a[1])).collect();
            AtomicMeasure::new(&pairs).map_err(|e| ConfigError(e.to_string()))
        };
        let built = match kind {
            Kind::GaussianShift => MarginalFamily::gaussian_shift(need(f.t0, "t0")?),
            Kind::ScaledBase => {
                let base = match f.base.as_deref() {
                    Some("normal") if f.atoms.is_none() => BaseLaw::StandardNormal,
                    Some("atoms") => BaseLaw::Atomic(atoms()?),
                    _ => return bad("family.base must be \"normal\" or \"atoms\" (with family.atoms)"),
                };
                MarginalFamily::scaled_base(need(f.s0, "s0")?, base)
            }
            Kind::ThreePoint => MarginalFamily::three_point(need(f.p0, "p0")?, need(f.p1, "p1")?),
            Kind::TwoAtom => Ok(MarginalFamily::two_atom()),
            Kind::Constant => Ok(MarginalFamily::constant(atoms()?)),
            Kind::AtomicTable => {
                let path = f.path.as_ref().ok_or_else(|| ConfigError("family.path is required".into()))?;
                let file = std::fs::File::open(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                MarginalFamily::read_atomic_table(file)
            }
            Kind::Pathological => {
                let growth = match f.growth.as_deref() {
                    Some("power") => Growth::Power { exponent: need(f.exponent, "exponent")? },
                    Some("exponential") => Growth::Exponential { rate: need(f.rate, "rate")? },
                    _ => return bad("family.growth must be \"power\" or \"exponential\""),
                };
                let pieces = f.pieces.ok_or_else(|| ConfigError("family.pieces is required".into()))?;
                MarginalFamily::pathological(growth, pieces)
            }
        }
        .map_err(|e| ConfigError(e.to_string()))?;
        Ok(if f.reversed { built.time_reversed() } else { built })
    }

    pub fn record_every(&self, grid: &SpaceTimeGrid) -> usize {
        match self.partition.record_every {
            0 => grid.steps.div_ceil(50).max(1),
            k => k,
        }
    }

    pub fn h_sim(&self, grid: &SpaceTimeGrid) -> f64 {
        if self.simulation.h_sim > 0.0 {
            self.simulation.h_sim
        } else {
            grid.dt
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }
}
