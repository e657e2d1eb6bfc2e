//! Peacock families described by their potential functions
//! `U(s, x) = -∫|x - y| μ_s(dy)` for `s ∈ [0, 1]`.

mod checks;
mod law;
mod pathological;

pub use checks::{assumption_check, convex_order_validate, AssumptionReport, ConvexOrderReport, GrowthEnvelope};
pub use law::{AtomicMeasure, Law};
pub use pathological::{tangent_chord_points, Growth, PathologicalFamily};

use crate::error::{Error, Result};
use crate::gaussian;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Read;

/// Law `X` that the scaled family multiplies by `s0 + s`.
#[derive(Clone, Debug)]
pub enum BaseLaw {
    StandardNormal,
    Atomic(AtomicMeasure),
}

#[derive(Clone, Debug)]
pub enum FamilyKind {
    /// `μ_s = N(0, t0 + s)`.
    GaussianShift {
        t0: f64,
    },
    /// `μ_s = law of (s0 + s)·X`.
    ScaledBase {
        s0: f64,
        base: BaseLaw,
    },
    /// `μ_s = p(s)δ₋₁ + (1 - 2p(s))δ₀ + p(s)δ₁` with `p` affine from `p0` to `p1`.
    ThreePoint {
        p0: f64,
        p1: f64,
    },
    /// Atom lists at increasing `s`, potentials interpolated linearly in `s`.
    AtomicTable(Vec<(f64, AtomicMeasure)>),
    Pathological(PathologicalFamily),
}

/// An immutable marginal family. All evaluations are pure.
#[derive(Clone, Debug)]
pub struct MarginalFamily {
    kind: FamilyKind,
    reversed: bool,
}

fn check_index(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain(format!("marginal index s = {s} outside [0, 1]")))
    }
}

impl MarginalFamily {
    pub fn gaussian_shift(t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::Domain(format!("variance offset t0 = {t0} must be positive")));
        }
        Ok(Self::from_kind(FamilyKind::GaussianShift { t0 }))
    }

    pub fn scaled_base(s0: f64, base: BaseLaw) -> Result<Self> {
        if !(s0 >= 0.0 && s0.is_finite()) {
            return Err(Error::Domain(format!("scale offset s0 = {s0} must be non-negative")));
        }
        Ok(Self::from_kind(FamilyKind::ScaledBase { s0, base }))
    }

    pub fn three_point(p0: f64, p1: f64) -> Result<Self> {
        for p in [p0, p1] {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::Domain(format!("three-point weight {p} outside [0, 1/2]")));
            }
        }
        Ok(Self::from_kind(FamilyKind::ThreePoint { p0, p1 }))
    }

    /// Rows must start at `s = 0` and end at `s = 1` with strictly increasing
    /// indices, unless a single row is given (constant family).
    pub fn atomic_table(rows: Vec<(f64, AtomicMeasure)>) -> Result<Self> {
        match rows.as_slice() {
            [] => return Err(Error::InvalidMarginal("empty atomic table".into())),
            [_] => {}
            [first, .., last] => {
                if first.0 != 0.0 || last.0 != 1.0 {
                    return Err(Error::InvalidMarginal("atomic table must span s = 0 to s = 1".into()));
                }
                if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidMarginal("atomic table indices not increasing".into()));
                }
            }
        }
        Ok(Self::from_kind(FamilyKind::AtomicTable(rows)))
    }

    /// `μ_s ≡ μ`.
    pub fn constant(measure: AtomicMeasure) -> Self {
        Self::from_kind(FamilyKind::AtomicTable(vec![(0.0, measure)]))
    }

    /// `δ₀` at `s = 0` to `½δ₋₁ + ½δ₁` at `s = 1`.
    pub fn two_atom() -> Self {
        let rows = vec![(0.0, AtomicMeasure::dirac_zero()), (1.0, AtomicMeasure::symmetric_pair(1.0).expect("valid"))];
        Self::from_kind(FamilyKind::AtomicTable(rows))
    }

    pub fn pathological(growth: Growth, pieces: usize) -> Result<Self> {
        Ok(Self::from_kind(FamilyKind::Pathological(PathologicalFamily::new(growth, pieces)?)))
    }

    fn from_kind(kind: FamilyKind) -> Self {
        Self { kind, reversed: false }
    }

    /// The family indexed backwards, `s ↦ μ_{1-s}`.
    pub fn time_reversed(mut self) -> Self {
        self.reversed = !self.reversed;
        self
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// True when every marginal coincides with `μ₀`.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            FamilyKind::ThreePoint { p0, p1 } => p0 == p1,
            FamilyKind::AtomicTable(rows) => rows.windows(2).all(|w| w[0].1 == w[1].1),
            _ => false,
        }
    }

    fn index(&self, s: f64) -> Result<f64> {
        check_index(s)?;
        Ok(if self.reversed { 1.0 - s } else { s })
    }

    fn table_segment(rows: &[(f64, AtomicMeasure)], s: f64) -> (usize, f64) {
        if rows.len() == 1 {
            return (0, 0.0);
        }
        let k = rows.partition_point(|r| r.0 <= s).saturating_sub(1).min(rows.len() - 2);
        let theta = (s - rows[k].0) / (rows[k + 1].0 - rows[k].0);
        (k, theta)
    }

    pub fn potential(&self, s: f64, x: f64) -> Result<f64> {
        let s = self.index(s)?;
        Ok(match &self.kind {
            FamilyKind::GaussianShift { t0 } => gaussian::potential(t0 + s, x),
            FamilyKind::ScaledBase { s0, base } => {
                let c = s0 + s;
                match base {
                    BaseLaw::StandardNormal => gaussian::potential(c * c, x),
                    BaseLaw::Atomic(m) => -m.atoms().map(|(y, w)| w * (x - c * y).abs()).sum::<f64>(),
                }
            }
            FamilyKind::ThreePoint { p0, p1 } => {
                let p = p0 + (p1 - p0) * s;
                -(1.0 - 2.0 * p) * x.abs() - p * ((x - 1.0).abs() + (x + 1.0).abs())
            }
            FamilyKind::AtomicTable(rows) => {
                let (k, theta) = Self::table_segment(rows, s);
                if theta == 0.0 {
                    rows[k].1.potential(x)
                } else {
                    (1.0 - theta) * rows[k].1.potential(x) + theta * rows[k + 1].1.potential(x)
                }
            }
            FamilyKind::Pathological(p) => -2.0 * p.call(s, x) - x,
        })
    }

    /// `∂U/∂s`, one-sided from the right where the family has kinks in `s`.
    pub fn potential_ds(&self, s: f64, x: f64) -> Result<f64> {
        let r = self.index(s)?;
        let sign = if self.reversed { -1.0 } else { 1.0 };
        let d = match &self.kind {
            FamilyKind::GaussianShift { t0 } => gaussian::potential_dvar(t0 + r, x),
            FamilyKind::ScaledBase { s0, base } => {
                let c = s0 + r;
                if c == 0.0 {
                    return Err(Error::Singularity { s, x });
                }
                match base {
                    BaseLaw::StandardNormal => -2.0 * gaussian::pdf(x / c),
                    BaseLaw::Atomic(m) => m.atoms().map(|(y, w)| w * y * signum0(x - c * y)).sum(),
                }
            }
            FamilyKind::ThreePoint { p0, p1 } => (p1 - p0) * (2.0 * x.abs() - (x - 1.0).abs() - (x + 1.0).abs()),
            FamilyKind::AtomicTable(rows) => {
                if rows.len() == 1 {
                    0.0
                } else {
                    let (k, _) = Self::table_segment(rows, r);
                    (rows[k + 1].1.potential(x) - rows[k].1.potential(x)) / (rows[k + 1].0 - rows[k].0)
                }
            }
            FamilyKind::Pathological(p) => -2.0 * p.call_ds(r, x),
        };
        Ok(sign * d)
    }

    /// `∫(y - x)_+ μ_s(dy)`, from closed forms independent of [`Self::potential`].
    pub fn call_price(&self, s: f64, x: f64) -> Result<f64> {
        let s = self.index(s)?;
        Ok(match &self.kind {
            FamilyKind::GaussianShift { t0 } => gaussian::call(t0 + s, x),
            FamilyKind::ScaledBase { s0, base } => {
                let c = s0 + s;
                match base {
                    BaseLaw::StandardNormal => gaussian::call(c * c, x),
                    BaseLaw::Atomic(m) => m.atoms().map(|(y, w)| w * (c * y - x).max(0.0)).sum(),
                }
            }
            FamilyKind::ThreePoint { p0, p1 } => {
                let p = p0 + (p1 - p0) * s;
                (1.0 - 2.0 * p) * (-x).max(0.0) + p * (1.0 - x).max(0.0) + p * (-1.0 - x).max(0.0)
            }
            FamilyKind::AtomicTable(rows) => {
                let (k, theta) = Self::table_segment(rows, s);
                if theta == 0.0 {
                    rows[k].1.call(x)
                } else {
                    (1.0 - theta) * rows[k].1.call(x) + theta * rows[k + 1].1.call(x)
                }
            }
            FamilyKind::Pathological(p) => p.call(s, x),
        })
    }

    /// The marginal `μ_s` as a samplable law.
    pub fn law(&self, s: f64) -> Result<Law> {
        let s = self.index(s)?;
        Ok(match &self.kind {
            FamilyKind::GaussianShift { t0 } => Law::Normal { var: t0 + s },
            FamilyKind::ScaledBase { s0, base } => {
                let c = s0 + s;
                match base {
                    BaseLaw::StandardNormal if c == 0.0 => Law::Atomic(AtomicMeasure::dirac_zero()),
                    BaseLaw::StandardNormal => Law::Normal { var: c * c },
                    BaseLaw::Atomic(m) => Law::Atomic(m.scaled(c)),
                }
            }
            FamilyKind::ThreePoint { p0, p1 } => {
                let p = p0 + (p1 - p0) * s;
                Law::Atomic(three_point_measure(p))
            }
            FamilyKind::AtomicTable(rows) => {
                let (k, theta) = Self::table_segment(rows, s);
                if theta == 0.0 {
                    Law::Atomic(rows[k].1.clone())
                } else {
                    Law::Atomic(rows[k].1.mix(&rows[k + 1].1, theta))
                }
            }
            FamilyKind::Pathological(p) => p.law(s),
        })
    }

    /// Radius containing all but `1e-6` of `μ_s` in each tail.
    pub fn support_radius(&self, s: f64) -> Result<f64> {
        Ok(self.law(s)?.radius())
    }

    /// Largest support radius over `s`, probed at the ends and on a coarse grid.
    pub fn max_support_radius(&self) -> f64 {
        (0..=16).map(|k| self.support_radius(k as f64 / 16.0).expect("index in range")).fold(0.0, f64::max)
    }

    /// Second moment of `μ_s`.
    pub fn variance(&self, s: f64) -> Result<f64> {
        Ok(self.law(s)?.second_moment())
    }

    /// `sup_s |∂U/∂s (s, x)|`, exact where the family provides it and over
    /// the given probes otherwise. Singular probes are skipped.
    pub fn sup_abs_potential_ds(&self, x: f64, s_probes: &[f64]) -> f64 {
        if let FamilyKind::Pathological(p) = &self.kind {
            return 2.0 * p.sup_call_ds(x);
        }
        s_probes.iter().filter_map(|&s| self.potential_ds(s, x).ok()).fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Moves atoms of tabulated families onto multiples of `dx` when that
    /// keeps every row centred; other kinds are returned unchanged.
    pub fn snapped_to_grid(&self, dx: f64) -> Self {
        match &self.kind {
            FamilyKind::AtomicTable(rows) => {
                let snapped: Option<Vec<_>> = rows.iter().map(|(s, m)| m.snapped(dx).map(|m| (*s, m))).collect();
                match snapped {
                    Some(rows) => Self { kind: FamilyKind::AtomicTable(rows), reversed: self.reversed },
                    None => self.clone(),
                }
            }
            _ => self.clone(),
        }
    }

    /// `count` i.i.d. draws from `μ₀`, reproducible from `(seed, stream)`.
    pub fn sample_mu0(&self, count: usize, seed: u64, stream: u64) -> Vec<f64> {
        let law = self.law(0.0).expect("index in range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..count).map(|_| law.sample(&mut rng)).collect()
    }

    /// Parses the `s,position,weight` table format. Consecutive rows with the
    /// same `s` form one marginal.
    pub fn read_atomic_table<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::InvalidMarginal(e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["s", "position", "weight"] {
            return Err(Error::InvalidMarginal(format!("expected header s,position,weight, found {header:?}")));
        }
        let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidMarginal(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                let v: f64 = rec[i]
                    .parse()
                    .map_err(|_| Error::InvalidMarginal(format!("row {}: cannot parse {:?}", line + 2, &rec[i])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::InvalidMarginal(format!("row {}: non-finite value", line + 2)))
                }
            };
            let (s, pos, w) = (field(0)?, field(1)?, field(2)?);
            match groups.last_mut() {
                Some(g) if g.0 == s => g.1.push((pos, w)),
                Some(g) if g.0 > s => {
                    return Err(Error::InvalidMarginal(format!("row {}: s decreases", line + 2)));
                }
                _ => groups.push((s, vec![(pos, w)])),
            }
        }
        let rows = groups
            .into_iter()
            .map(|(s, mut atoms)| {
                atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
                AtomicMeasure::normalized(&atoms).map(|m| (s, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::atomic_table(rows)
    }
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn three_point_measure(p: f64) -> AtomicMeasure {
    let atoms: Vec<(f64, f64)> =
        [(-1.0, p), (0.0, 1.0 - 2.0 * p), (1.0, p)].into_iter().filter(|a| a.1 > 0.0).collect();
    AtomicMeasure::normalized(&atoms).expect("three-point weights are valid")
}
