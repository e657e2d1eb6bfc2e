use super::MarginalFamily;
use serde::Serialize;

const ORDER_TOL: f64 = 1e-9;
const JUMP_TOL: f64 = 1e-3;
const MAX_DEGREE: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct ConvexOrderReport {
    pub pass: bool,
    /// Smallest `U(s,x) - U(s',x)` over probes with `s ≤ s'`, capped at 0.
    pub worst_violation: f64,
    /// `(s, s', x)` where the worst violation occurs.
    pub location: Option<(f64, f64, f64)>,
}

/// Checks `U(s, x) ≥ U(s', x) - 1e-9` for all probe pairs `s ≤ s'`.
pub fn convex_order_validate(family: &MarginalFamily, s_probes: &[f64], x_probes: &[f64]) -> ConvexOrderReport {
    let mut s_sorted = s_probes.to_vec();
    s_sorted.sort_by(f64::total_cmp);
    let mut worst = 0.0;
    let mut location = None;
    for &x in x_probes {
        // smallest potential seen so far and where
        let mut low = f64::INFINITY;
        let mut low_s = 0.0;
        for &s in &s_sorted {
            let Ok(u) = family.potential(s, x) else { continue };
            if u < low {
                low = u;
                low_s = s;
            }
            let gap = low - u;
            if gap < worst {
                worst = gap;
                location = Some((low_s, s, x));
            }
        }
    }
    ConvexOrderReport { pass: worst >= -ORDER_TOL, worst_violation: worst, location }
}

/// `sup_s |∂U/∂s(s, x)| ≤ constant·(1 + |x|^degree)` on the probe range.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthEnvelope {
    pub degree: u32,
    pub constant: f64,
}

impl GrowthEnvelope {
    pub fn bound(&self, x: f64) -> f64 {
        self.constant * (1.0 + x.abs().powi(self.degree as i32))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub continuous: bool,
    /// First `(s, x)` probe where `∂U/∂s` jumps or is singular.
    pub discontinuity: Option<(f64, f64)>,
    /// Log-log slope of the running maximum of `sup_s |∂U/∂s|` over the
    /// outer three quarters of the probe range.
    pub growth_exponent: f64,
    pub passes_by_degree: [bool; MAX_DEGREE + 1],
    pub growth_degree: Option<u32>,
    pub envelope: Option<GrowthEnvelope>,
}

impl AssumptionReport {
    pub fn within_assumptions(&self) -> bool {
        self.continuous && self.growth_degree.is_some()
    }
}

/// Probes continuity of `s ↦ ∂U/∂s` on `s_count` uniform points and the
/// polynomial growth of its supremum over `x_probes`.
pub fn assumption_check(family: &MarginalFamily, x_probes: &[f64], s_count: usize) -> AssumptionReport {
    let s_probes: Vec<f64> = (0..s_count).map(|k| k as f64 / (s_count - 1) as f64).collect();

    let mut discontinuity = None;
    'scan: for (k, &s) in s_probes.iter().enumerate() {
        for &x in x_probes {
            let here = family.potential_ds(s, x);
            let next = s_probes.get(k + 1).map(|&s2| family.potential_ds(s2, x));
            let broken = match (here, next) {
                (Err(_), _) => true,
                (Ok(a), Some(Ok(b))) => (b - a).abs() > JUMP_TOL,
                _ => false,
            };
            if broken {
                discontinuity = Some((s, x));
                break 'scan;
            }
        }
    }

    let mut radial: Vec<(f64, f64)> =
        x_probes.iter().map(|&x| (x.abs(), family.sup_abs_potential_ds(x, &s_probes))).collect();
    radial.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut running = 0.0_f64;
    let envelope: Vec<(f64, f64)> = radial
        .iter()
        .map(|&(r, v)| {
            running = running.max(v);
            (r, running)
        })
        .collect();
    let reach = envelope.last().map_or(0.0, |e| e.0);
    let pts: Vec<(f64, f64)> = envelope
        .iter()
        .filter(|e| e.0 >= reach / 4.0 && e.0 > 0.0 && e.1 > 0.0)
        .map(|e| (e.0.ln(), e.1.ln()))
        .collect();
    let growth_exponent = slope(&pts);

    let mut passes_by_degree = [false; MAX_DEGREE + 1];
    for (p, pass) in passes_by_degree.iter_mut().enumerate() {
        *pass = growth_exponent <= p as f64 + 0.5;
    }
    let growth_degree = passes_by_degree.iter().position(|&b| b).map(|p| p as u32);
    let envelope = growth_degree.map(|p| {
        let constant = radial.iter().map(|&(r, v)| v / (1.0 + r.powi(p as i32))).fold(0.0, f64::max);
        GrowthEnvelope { degree: p, constant }
    });

    AssumptionReport {
        continuous: discontinuity.is_none(),
        discontinuity,
        growth_exponent,
        passes_by_degree,
        growth_degree,
        envelope,
    }
}

/// Least-squares slope; 0 for fewer than two distinct abscissae.
fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}
