//! Aggregation of density estimates on dyadic grids.
//!
//! Given a dictionary `f_1, ..., f_M` of bounded functions and `n`
//! observations drawn from an unknown density `f` on `[0, 1]`, the crate
//! builds the estimators whose excess L2 risk against the best dictionary
//! entry can be compared at the deviation level:
//!
//! - the empirical risk minimizer over the discrete set (a selector),
//! - penalized aggregation over the simplex with a variance penalty and
//!   prior weights ([`estimators::q_aggregate`]),
//! - exponential weights, and
//! - empirical risk minimization over the convex hull.
//!
//! Around them sit generators for the hard instances on which the slower
//! procedures provably lose ([`constructions`]) and a reproducible Monte
//! Carlo harness that estimates deviation tails and checks them against
//! closed-form envelopes ([`experiments`]).
//!
//! Everything is exact where it can be: functions are piecewise constant on
//! dyadic grids, so inner products, risks, and excess risks are finite sums
//! rather than quadratures, and sampling is the only randomness in any
//! experiment.

pub mod constructions;
pub mod estimators;
pub mod experiments;
pub mod grid;
pub mod risk;
pub mod solver;

pub use constructions::{
    gen_erm_hull, gen_ew, gen_ew2, gen_exp_tail, gen_selector, validate, ConstructionError,
    InstanceKind, InstanceParams, LowerBoundInstance, ValidationCheck, ValidationReport,
};
pub use estimators::{
    default_beta, erm_convex_hull, erm_selector, excess_risk, exponential_weights, q_aggregate,
    weighted_q_aggregate, EstimatorError, EstimatorOutput,
};
pub use experiments::{
    check_bernstein, replication_seed, run_ew_suboptimality, run_hull_comparison,
    run_selector_experiment, run_tail, tail_bound_p, tail_bound_q, wilson_interval,
    EstimatorChoice, ExperimentConfig, ExperimentError, TailEstimate,
};
pub use grid::{
    inner_product, norm_sq, rademacher_system, sup_norm, DensityFunction, GridError,
    GridFunction, MAX_LEVEL,
};
pub use risk::{
    chi2_divergence, combine, empirical_risk, kl_divergence, objective_h, penalty,
    prior_penalty, risk, weighted_norm_sq, Dictionary, Prior, RiskError, Sample, SimplexWeights,
};
pub use solver::{
    build_qp, certify_strong_convexity, project_simplex, solve, SimplexQp, SolverError,
    SolverReport, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
