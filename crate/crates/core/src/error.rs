use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity in d/ds U at s = {s}, x = {x}")]
    Singularity { s: f64, x: f64 },

    #[error("invalid marginal data: {0}")]
    InvalidMarginal(String),

    #[error("convex order violated between s = {s_prev} and s = {s} at x = {x}: U increment {increment:e} > 0")]
    ConvexOrder { s_prev: f64, s: f64, x: f64, increment: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("barrier extraction unstable on layer {layer}: {flagged} of {region} region nodes flagged ({fraction:.4} > 0.01)")]
    ExtractionUnstable { layer: usize, flagged: u64, region: u64, fraction: f64 },

    #[error("refinement did not converge: Cauchy difference {current:e} at level {level} is not below {previous:e}")]
    NonConvergence { level: usize, previous: f64, current: f64 },

    #[error("horizon too short: {censored} of {paths} paths not stopped by t = {horizon}")]
    Horizon { censored: usize, paths: usize, horizon: f64 },

    #[error("invalid payoff function: {0}")]
    InvalidFunction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
