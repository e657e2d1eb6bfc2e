//! Order-independent reductions and the few statistics the checks need.

use serde::Serialize;

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on how the work was scheduled.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let mean = pairwise_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self { mean, stderr: (var / n as f64).sqrt(), samples: n }
    }

    /// `|mean - target| ≤ k·stderr + slack`.
    pub fn agrees_with(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr + slack
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// a distribution function. Sorts a copy of the samples.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut k = 0;
    while k < xs.len() {
        // handle ties as one jump
        let x = xs[k];
        let mut end = k;
        while end < xs.len() && xs[end] == x {
            end += 1;
        }
        let f = cdf(x);
        let below = k as f64 / n;
        let f_left = left_limit(&cdf, x);
        d = d.max((f_left - below).abs()).max((end as f64 / n - f).abs());
        k = end;
    }
    d
}

fn left_limit<F: Fn(f64) -> f64>(cdf: &F, x: f64) -> f64 {
    let step = x.abs().max(1.0) * 1e-12;
    cdf(x - step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn estimate_of_constant() {
        let e = Estimate::from_samples(&[2.0; 10]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn ks_with_atoms() {
        let xs = vec![0.0, 0.0, 1.0, 1.0];
        let d = ks_statistic(&xs, |x| {
            if x >= 1.0 {
                1.0
            } else if x >= 0.0 {
                0.5
            } else {
                0.0
            }
        });
        assert!(d < 1e-12);
    }
}
