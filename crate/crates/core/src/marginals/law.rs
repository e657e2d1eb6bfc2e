use crate::error::{Error, Result};
use crate::gaussian;
use crate::quadrature;
use rand::Rng;
use rand_distr::StandardNormal;

const WEIGHT_TOL: f64 = 1e-12;

/// A centred probability measure with finitely many atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Atoms as `(position, weight)`. Positions must be strictly increasing,
    /// weights in `(0, 1]` summing to one, and the mean must vanish.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMarginal("no atoms".into()));
        }
        for &(p, w) in atoms {
            if !p.is_finite() || !w.is_finite() {
                return Err(Error::InvalidMarginal(format!("non-finite atom ({p}, {w})")));
            }
            if w <= 0.0 || w > 1.0 {
                return Err(Error::InvalidMarginal(format!("weight {w} outside (0, 1]")));
            }
        }
        if atoms.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidMarginal("atom positions not strictly increasing".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMarginal(format!("weights sum to {total}")));
        }
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        let scale = atoms.iter().fold(1.0_f64, |m, a| m.max(a.0.abs()));
        if mean.abs() > WEIGHT_TOL * scale {
            return Err(Error::InvalidMarginal(format!("mean {mean:e} is not zero")));
        }
        Ok(Self { positions: atoms.iter().map(|a| a.0).collect(), weights: atoms.iter().map(|a| a.1).collect() })
    }

    pub fn dirac_zero() -> Self {
        Self { positions: vec![0.0], weights: vec![1.0] }
    }

    /// `½δ₋ₐ + ½δₐ`.
    pub fn symmetric_pair(a: f64) -> Result<Self> {
        Self::new(&[(-a, 0.5), (a, 0.5)])
    }

    /// Builds a measure from atoms whose weights may be off by up to `1e-9`
    /// in total; weights are renormalised and zero weights dropped.
    pub fn normalized(atoms: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !total.is_finite() || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMarginal(format!("weights sum to {total}")));
        }
        let kept: Vec<_> = atoms.iter().filter(|a| a.1 != 0.0).map(|&(p, w)| (p, w / total)).collect();
        Self::new(&kept)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn potential(&self, x: f64) -> f64 {
        -self.atoms().map(|(p, w)| w * (x - p).abs()).sum::<f64>()
    }

    pub fn call(&self, x: f64) -> f64 {
        self.atoms().map(|(p, w)| w * (p - x).max(0.0)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms().filter(|a| a.0 <= x).map(|a| a.1).sum::<f64>().min(1.0)
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms().map(|(p, w)| w * p * p).sum()
    }

    pub fn radius(&self) -> f64 {
        self.positions.iter().fold(0.0, |m: f64, p| m.max(p.abs()))
    }

    /// Image under `y ↦ c·y`, `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::dirac_zero();
        }
        Self { positions: self.positions.iter().map(|p| p * c).collect(), weights: self.weights.clone() }
    }

    /// `(1-θ)·self + θ·other`, merging coincident atoms.
    pub fn mix(&self, other: &Self, theta: f64) -> Self {
        let mut atoms: Vec<(f64, f64)> = self
            .atoms()
            .map(|(p, w)| (p, (1.0 - theta) * w))
            .chain(other.atoms().map(|(p, w)| (p, theta * w)))
            .filter(|a| a.1 > 0.0)
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        Self { positions: merged.iter().map(|a| a.0).collect(), weights: merged.iter().map(|a| a.1).collect() }
    }

    /// Rounds every atom to the nearest multiple of `dx`. Returns `None`
    /// when the rounded measure is no longer centred or atoms collide.
    pub fn snapped(&self, dx: f64) -> Option<Self> {
        let atoms: Vec<(f64, f64)> = self.atoms().map(|(p, w)| ((p / dx).round() * dx, w)).collect();
        Self::new(&atoms).ok()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (p, w) in self.atoms() {
            acc += w;
            if u < acc {
                return p;
            }
        }
        *self.positions.last().expect("non-empty")
    }
}

/// The law of a single marginal, in whatever form sampling and
/// distribution functions are cheapest.
#[derive(Clone, Debug)]
pub enum Law {
    Normal {
        var: f64,
    },
    Atomic(AtomicMeasure),
    /// `N(0,1)` restricted to `(-∞, cut]` with the remaining mass at `atom`.
    NormalWithTailAtom {
        cut: f64,
        atom: f64,
    },
    Mixture(Vec<(f64, Law)>),
}

/// `∫_{-∞}^{c} |x - y| φ(y) dy`.
fn truncated_normal_abs(c: f64, x: f64) -> f64 {
    let a = x.min(c);
    let below = x * gaussian::cdf(a) + gaussian::pdf(a);
    let above =
        if x < c { gaussian::pdf(a) - gaussian::pdf(c) - x * (gaussian::cdf(c) - gaussian::cdf(a)) } else { 0.0 };
    below + above
}

impl Law {
    pub fn potential(&self, x: f64) -> f64 {
        match self {
            Law::Normal { var } => gaussian::potential(*var, x),
            Law::Atomic(m) => m.potential(x),
            Law::NormalWithTailAtom { cut, atom } => {
                -truncated_normal_abs(*cut, x) - gaussian::sf(*cut) * (x - atom).abs()
            }
            Law::Mixture(parts) => parts.iter().map(|(w, l)| w * l.potential(x)).sum(),
        }
    }

    /// Potential of this law convolved with `N(0, t)`.
    pub fn smoothed_potential(&self, t: f64, x: f64) -> f64 {
        if t <= 0.0 {
            return self.potential(x);
        }
        match self {
            Law::Normal { var } => gaussian::potential(var + t, x),
            Law::Atomic(m) => m.atoms().map(|(p, w)| w * gaussian::potential(t, x - p)).sum(),
            Law::NormalWithTailAtom { cut, atom } => {
                let lo = (-12.0_f64).min(cut - 1.0);
                let body = quadrature::integrate_split(
                    |y| gaussian::pdf(y) * gaussian::potential(t, x - y),
                    lo,
                    *cut,
                    &[x],
                    1e-11,
                );
                body + gaussian::sf(*cut) * gaussian::potential(t, x - atom)
            }
            Law::Mixture(parts) => parts.iter().map(|(w, l)| w * l.smoothed_potential(t, x)).sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Normal { var } => gaussian::law_cdf(*var, x),
            Law::Atomic(m) => m.cdf(x),
            Law::NormalWithTailAtom { cut, atom } => {
                if x >= *atom {
                    1.0
                } else {
                    gaussian::cdf(x.min(*cut))
                }
            }
            Law::Mixture(parts) => parts.iter().map(|(w, l)| w * l.cdf(x)).sum(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Law::Normal { var } => *var,
            Law::Atomic(m) => m.second_moment(),
            Law::NormalWithTailAtom { cut, atom } => {
                gaussian::cdf(*cut) - cut * gaussian::pdf(*cut) + gaussian::sf(*cut) * atom * atom
            }
            Law::Mixture(parts) => parts.iter().map(|(w, l)| w * l.second_moment()).sum(),
        }
    }

    /// `∫|y| μ(dy)`.
    pub fn mean_abs(&self) -> f64 {
        -self.potential(0.0)
    }

    /// Point masses as `(position, weight)`, merged across mixture parts.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = match self {
            Law::Normal { var } if *var <= 0.0 => vec![(0.0, 1.0)],
            Law::Normal { .. } => Vec::new(),
            Law::Atomic(m) => m.atoms().collect(),
            Law::NormalWithTailAtom { cut, atom } => vec![(*atom, gaussian::sf(*cut))],
            Law::Mixture(parts) => {
                parts.iter().flat_map(|(w, l)| l.atoms().into_iter().map(move |(p, m)| (p, w * m))).collect()
            }
        };
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        out
    }

    /// True when the law has no point masses.
    pub fn is_continuous(&self) -> bool {
        self.atoms().iter().all(|a| a.1 == 0.0)
    }

    /// Radius containing all but `1e-6` of the mass in each tail.
    pub fn radius(&self) -> f64 {
        let q = gaussian::quantile(1.0 - 1e-6);
        match self {
            Law::Normal { var } => var.max(0.0).sqrt() * q,
            Law::Atomic(m) => m.radius(),
            Law::NormalWithTailAtom { cut, atom } => q.max(cut.abs()).max(atom.abs()),
            Law::Mixture(parts) => parts.iter().fold(0.0, |m: f64, (_, l)| m.max(l.radius())),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Law::Normal { var } => {
                let z: f64 = rng.sample(StandardNormal);
                var.max(0.0).sqrt() * z
            }
            Law::Atomic(m) => m.sample(rng),
            Law::NormalWithTailAtom { cut, atom } => {
                let u: f64 = rng.random();
                let below = gaussian::cdf(*cut);
                if u < below {
                    // inverse transform on the truncated part
                    gaussian::quantile(u.max(f64::MIN_POSITIVE)).min(*cut)
                } else {
                    *atom
                }
            }
            Law::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, l) in parts {
                    acc += w;
                    if u < acc {
                        return l.sample(rng);
                    }
                }
                parts.last().expect("non-empty mixture").1.sample(rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_atoms() {
        assert!(AtomicMeasure::new(&[(-1.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(AtomicMeasure::new(&[(1.0, 0.5), (-1.0, 0.5)]).is_err());
        assert!(AtomicMeasure::new(&[(0.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(AtomicMeasure::new(&[(f64::NAN, 1.0)]).is_err());
        assert!(AtomicMeasure::normalized(&[(-1.0, 0.5 + 5e-11), (1.0, 0.5 + 5e-11)]).is_ok());
        assert!(AtomicMeasure::normalized(&[(-1.0, 0.5), (1.0, 0.5 + 1e-8)]).is_err());
    }

    #[test]
    fn two_atom_potential() {
        let m = AtomicMeasure::symmetric_pair(1.0).unwrap();
        assert_eq!(m.potential(0.0), -1.0);
        assert_eq!(m.potential(3.0), -3.0);
        assert_eq!(m.call(0.0), 0.5);
    }

    #[test]
    fn snapping_keeps_centre() {
        let m = AtomicMeasure::symmetric_pair(0.999).unwrap();
        let s = m.snapped(0.02).unwrap();
        assert_eq!(s.atoms().map(|a| a.0).collect::<Vec<_>>(), vec![-1.0, 1.0]);
        let lopsided = AtomicMeasure::new(&[(-0.2, 0.6), (0.3, 0.4)]).unwrap();
        assert!(lopsided.snapped(0.25).is_none());
    }

    #[test]
    fn tail_atom_law_is_centred_with_closed_potential() {
        let x1 = 2.0 * gaussian::pdf(0.0);
        let law = Law::NormalWithTailAtom { cut: 0.0, atom: x1 };
        // far right the potential is -x exactly up to the Gaussian tail
        assert!((law.potential(30.0) + 30.0).abs() < 1e-12);
        assert!((law.potential(-30.0) - (-30.0)).abs() < 1e-12);
        assert!((law.cdf(x1) - 1.0).abs() < 1e-15);
    }
}
