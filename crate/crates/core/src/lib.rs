//! Root barriers for multi-marginal and full-marginal Skorokhod embeddings.
//!
//! The pipeline is: a [`MarginalFamily`] and a [`Partition`] define layered
//! obstacle problems, [`solve_layers`] marches them on a random-walk grid,
//! [`extract`] reads off the stopping regions, [`solve_limit`] refines the
//! partition, and [`simulate_root`] runs Brownian paths through the barriers.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod barriers;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod layers;
pub mod limit;
pub mod marginals;
pub mod payoff;
pub mod quadrature;
pub mod simulate;
pub mod stats;
pub mod tolerances;
pub mod tree;

pub use barriers::{analytic_compare, extract, ordering_check, BarrierFamily, OrderingReport};
pub use error::{Error, Result};
pub use grid::{make_grid, make_partition, Partition, PartitionStyle, SpaceTimeGrid};
pub use layers::{complementarity_check, solve_layers, ComplementarityReport, SolveOptions, ValueSurface};
pub use limit::{
    bounds_check, partition_independence, pde_residual, regularity_report, solve_limit, BoundsReport,
    IndependenceReport, LimitOptions, LimitSurface, RegularityReport, ResidualReport,
};
pub use marginals::{
    assumption_check, convex_order_validate, AssumptionReport, AtomicMeasure, BaseLaw, ConvexOrderReport, FamilyKind,
    Growth, GrowthEnvelope, Law, MarginalFamily,
};
pub use payoff::PiecewisePoly;
pub use simulate::{
    alternative_embedding, continuity_check, empirical_potential, lower_bound_mc, marginal_fit, optimality_functional,
    simulate_root, AtomFit, ContinuityReport, ContinuityRow, HeuristicRule, MarginalFit, PathEnsemble, SimOptions,
};
pub use stats::{ks_statistic, pairwise_sum, Estimate};
pub use tolerances::Tolerances;
pub use tree::tree_oracle;
