use super::law::Law;
use crate::error::{Error, Result};
use crate::gaussian;

/// Target growth function for the derivative blow-up construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Growth {
    /// `G(x) = |x|^exponent`.
    Power { exponent: f64 },
    /// `G(x) = exp(rate·|x|)`.
    Exponential { rate: f64 },
}

impl Growth {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Growth::Power { exponent } => x.abs().powf(exponent),
            Growth::Exponential { rate } => (rate * x.abs()).exp(),
        }
    }
}

/// Call function of `N(0,1)`.
fn v1(x: f64) -> f64 {
    gaussian::call(1.0, x)
}

/// Tangent-chord points starting at 0: each next point is where the tangent
/// of the standard normal call function at the current point reaches zero.
pub fn tangent_chord_points(count: usize) -> Vec<f64> {
    let mut xs = vec![0.0];
    while xs.len() < count {
        let x = *xs.last().expect("non-empty");
        // the call slope is -sf(x)
        xs.push(x + v1(x) / gaussian::sf(x));
    }
    xs
}

/// Smooth step on `[0,1]`: the integral of the quartic kernel
/// `15/16 (1-v²)²` rescaled to a centred window of the given width.
fn smooth_step(u: f64, width: f64) -> (f64, f64) {
    let v = (u - 0.5) * 2.0 / width;
    if v <= -1.0 {
        return (0.0, 0.0);
    }
    if v >= 1.0 {
        return (1.0, 0.0);
    }
    let value = 0.5 + 15.0 / 16.0 * (v - 2.0 * v.powi(3) / 3.0 + v.powi(5) / 5.0);
    let slope = 15.0 / 16.0 * (1.0 - v * v).powi(2) * 2.0 / width;
    (value, slope)
}

/// Peacock ending at `N(0,1)` whose `s`-derivative exceeds a prescribed
/// growth function at the tangent-chord points.
#[derive(Clone, Debug)]
pub struct PathologicalFamily {
    growth: Growth,
    /// Knots `t_0 = 0 < … < t_J`, followed by the terminal index 1.
    knots: Vec<f64>,
    /// Tangent-chord points `x_0 … x_{J+1}`.
    points: Vec<f64>,
    /// Bump width (fraction of its segment) per segment.
    widths: Vec<f64>,
}

impl PathologicalFamily {
    /// `pieces` intermediate marginals at `t_j = 1 - 2^{-j}`, `j < pieces`.
    pub fn new(growth: Growth, pieces: usize) -> Result<Self> {
        if pieces == 0 || pieces > 40 {
            return Err(Error::Domain(format!("pieces = {pieces} must lie in 1..=40")));
        }
        if growth.eval(1.0) <= 0.0 || growth.eval(2.0) < growth.eval(1.0) {
            return Err(Error::Domain("growth function must be positive and increasing".into()));
        }
        let mut knots: Vec<f64> = (0..pieces).map(|j| 1.0 - 0.5_f64.powi(j as i32)).collect();
        knots.push(1.0);
        let points = tangent_chord_points(pieces + 1);
        let widths = (0..pieces)
            .map(|j| {
                let len = knots[j + 1] - knots[j];
                let x = points[j + 1];
                let needed = growth.eval(x) / v1(x);
                (15.0 / (8.0 * len * needed)).min(1.0)
            })
            .collect();
        Ok(Self { growth, knots, points, widths })
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn pieces(&self) -> usize {
        self.widths.len()
    }

    /// Call function of the `k`-th node marginal; `k = pieces` is `N(0,1)`.
    pub fn node_call(&self, k: usize, x: f64) -> f64 {
        if k >= self.pieces() {
            return v1(x);
        }
        let xk = self.points[k];
        if x <= xk {
            v1(x)
        } else {
            (v1(xk) - gaussian::sf(xk) * (x - xk)).max(0.0)
        }
    }

    fn node_law(&self, k: usize) -> Law {
        if k >= self.pieces() {
            Law::Normal { var: 1.0 }
        } else {
            Law::NormalWithTailAtom { cut: self.points[k], atom: self.points[k + 1] }
        }
    }

    /// Segment index, step value and step slope (per unit `s`) at `s`.
    fn locate(&self, s: f64) -> (usize, f64, f64) {
        let j = self.knots.partition_point(|&k| k <= s).saturating_sub(1).min(self.pieces() - 1);
        let len = self.knots[j + 1] - self.knots[j];
        let (phi, dphi) = smooth_step((s - self.knots[j]) / len, self.widths[j]);
        (j, phi, dphi / len)
    }

    pub fn call(&self, s: f64, x: f64) -> f64 {
        if s >= 1.0 {
            return v1(x);
        }
        let (j, phi, _) = self.locate(s);
        (1.0 - phi) * self.node_call(j, x) + phi * self.node_call(j + 1, x)
    }

    pub fn call_ds(&self, s: f64, x: f64) -> f64 {
        let (j, _, dphi) = self.locate(s.min(1.0));
        dphi * (self.node_call(j + 1, x) - self.node_call(j, x))
    }

    pub fn law(&self, s: f64) -> Law {
        if s >= 1.0 {
            return Law::Normal { var: 1.0 };
        }
        let (j, phi, _) = self.locate(s);
        if phi == 0.0 {
            return self.node_law(j);
        }
        Law::Mixture(vec![(1.0 - phi, self.node_law(j)), (phi, self.node_law(j + 1))])
    }

    /// `sup_s |∂_s V(s, x)|`, attained at the centre of each bump.
    pub fn sup_call_ds(&self, x: f64) -> f64 {
        (0..self.pieces())
            .map(|j| {
                let len = self.knots[j + 1] - self.knots[j];
                let peak = 15.0 / (8.0 * self.widths[j] * len);
                peak * (self.node_call(j + 1, x) - self.node_call(j, x))
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_shape() {
        for w in [1.0, 0.3] {
            assert_eq!(smooth_step(0.0, w), (0.0, 0.0));
            assert_eq!(smooth_step(1.0, w), (1.0, 0.0));
            assert!((smooth_step(0.5, w).0 - 0.5).abs() < 1e-15);
            assert!((smooth_step(0.5, w).1 - 15.0 / (8.0 * w)).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_meets_growth_target() {
        let fam = PathologicalFamily::new(Growth::Power { exponent: 3.0 }, 8).unwrap();
        for j in 1..8 {
            let x = fam.points()[j];
            assert!(fam.sup_call_ds(x) >= fam.growth().eval(x) * (1.0 - 1e-12));
        }
    }
}
