//! Non-decreasing, non-negative piecewise-polynomial cost rates `f(t)`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly {
    /// `0 = b_0 < b_1 < …`; piece `k` covers `[b_k, b_{k+1})`, the last one is unbounded.
    breaks: Vec<f64>,
    /// Ascending power coefficients in `t` per piece.
    coeffs: Vec<Vec<f64>>,
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn antiderivative(c: &[f64], t: f64) -> f64 {
    c.iter().enumerate().rev().fold(0.0, |acc, (k, &a)| acc * t + a / (k + 1) as f64) * t
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

impl PiecewisePoly {
    /// Rejects functions that are negative or decrease anywhere on
    /// `[0, b_last + 100]`, or whose last piece eventually decreases.
    pub fn new(breaks: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.is_empty() || breaks[0] != 0.0 || breaks.len() != coeffs.len() {
            return Err(Error::InvalidFunction("breaks must start at 0, one per piece".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidFunction("breaks must increase".into()));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidFunction("non-finite coefficient".into()));
        }
        let f = Self { breaks, coeffs };
        let last = *f.breaks.last().expect("non-empty");
        if f.eval(0.0) < 0.0 {
            return Err(Error::InvalidFunction("f(0) < 0".into()));
        }
        for k in 0..f.coeffs.len() {
            let lo = f.breaks[k];
            let hi = f.breaks.get(k + 1).copied().unwrap_or(last + 100.0);
            let d = derivative(&f.coeffs[k]);
            for q in 0..=2000 {
                let t = lo + (hi - lo) * q as f64 / 2000.0;
                if horner(&d, t) < -1e-12 {
                    return Err(Error::InvalidFunction(format!("f decreases near t = {t}")));
                }
            }
            if k > 0 && horner(&f.coeffs[k], lo) < horner(&f.coeffs[k - 1], lo) - 1e-12 {
                return Err(Error::InvalidFunction(format!("f jumps down at t = {lo}")));
            }
        }
        let lead = f.coeffs.last().expect("non-empty").iter().rev().find(|&&c| c != 0.0).copied();
        if derivative(f.coeffs.last().expect("non-empty")).iter().any(|&c| c != 0.0)
            && matches!(lead, Some(c) if c < 0.0)
        {
            return Err(Error::InvalidFunction("f eventually decreases".into()));
        }
        Ok(f)
    }

    /// `t^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::new(vec![0.0], vec![c]).expect("monomials are non-decreasing on [0, ∞)")
    }

    /// `1{t ≥ at}`.
    pub fn step(at: f64) -> Result<Self> {
        Self::new(vec![0.0, at], vec![vec![0.0], vec![1.0]])
    }

    fn piece(&self, t: f64) -> usize {
        self.breaks.partition_point(|&b| b <= t).saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        horner(&self.coeffs[self.piece(t)], t)
    }

    /// `∫_0^t f`.
    pub fn integral(&self, t: f64) -> f64 {
        let last = self.piece(t);
        let mut total = 0.0;
        for k in 0..=last {
            let lo = self.breaks[k];
            let hi = if k == last { t } else { self.breaks[k + 1] };
            total += antiderivative(&self.coeffs[k], hi) - antiderivative(&self.coeffs[k], lo);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrals() {
        assert!((PiecewisePoly::monomial(1).integral(1.0) - 0.5).abs() < 1e-15);
        assert!((PiecewisePoly::monomial(2).integral(3.0) - 9.0).abs() < 1e-12);
        assert!((PiecewisePoly::step(0.5).unwrap().integral(2.0) - 1.5).abs() < 1e-15);
        assert_eq!(PiecewisePoly::step(0.5).unwrap().integral(0.25), 0.0);
    }

    #[test]
    fn rejects_decreasing() {
        assert!(PiecewisePoly::new(vec![0.0], vec![vec![1.0, -1.0]]).is_err());
        assert!(PiecewisePoly::new(vec![0.0, 1.0], vec![vec![2.0], vec![1.0]]).is_err());
        assert!(PiecewisePoly::new(vec![0.0], vec![vec![-1.0]]).is_err());
        assert!(PiecewisePoly::new(vec![0.0], vec![vec![0.0, 2.0, -0.001]]).is_err());
    }
}
