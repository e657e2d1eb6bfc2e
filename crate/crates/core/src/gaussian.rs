//! Closed forms for centred Gaussian laws: density, distribution function,
//! quantile, potential and call function.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `E|N(0,1)| = sqrt(2/pi)`.
pub const MEAN_ABS: f64 = 0.797_884_560_802_865_4;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - cdf(z)` without cancellation.
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

pub fn quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Potential `-E|x - Y|` of `Y ~ N(0, var)`. `var = 0` gives `-|x|`.
pub fn potential(var: f64, x: f64) -> f64 {
    if var <= 0.0 {
        return -x.abs();
    }
    let sd = var.sqrt();
    let z = x.abs() / sd;
    // -(|x|(2Φ(z) - 1) + 2 sd φ(z)), written with the upper tail for large |x|
    -(x.abs() * (1.0 - 2.0 * sf(z)) + 2.0 * sd * pdf(z))
}

/// `d/dvar` of [`potential`]: `-φ(x/sd)/sd`.
pub fn potential_dvar(var: f64, x: f64) -> f64 {
    let sd = var.sqrt();
    -pdf(x / sd) / sd
}

/// Call function `E(Y - x)_+` of `Y ~ N(0, var)`.
pub fn call(var: f64, x: f64) -> f64 {
    if var <= 0.0 {
        return (-x).max(0.0);
    }
    let sd = var.sqrt();
    let z = x / sd;
    sd * pdf(z) - x * sf(z)
}

/// Distribution function of `N(0, var)`.
pub fn law_cdf(var: f64, x: f64) -> f64 {
    if var <= 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    cdf(x / var.sqrt())
}
