//! Parallel random block-coordinate forward-backward solver.
//!
//! This crate minimizes composite objectives `F(x) = f(x) + sum_i h_i(x_i)`
//! by updating a random subset of coordinate blocks per iteration:
//!
//! ```text
//! x_i <- x_i + eps_i (prox_{gamma_i h_i}(x_i - gamma_i grad_i f(x)) - x_i)
//! ```
//!
//! where `eps` is an arbitrary block sampling with marginals `p_i > 0` and
//! the stepsizes obey `gamma_i < 2 / nu_i` for smoothness parameters `nu_i`
//! tied to both the partial-separability structure of `f` and the sampling
//! ([`smoothness`], [`sampling`]). Supporting pieces:
//!
//! - [`block`]: block partitions and the weighted norms of the analysis;
//! - [`sampling`]: serial, tau-nice, fully parallel, and explicit-atom
//!   samplings with exact marginals and the `beta` constants (closed forms
//!   plus exhaustive enumeration);
//! - [`smoothness`]: certificates for the S1/S2/S3 descent conditions and
//!   brute-force verification of the underlying inequalities;
//! - [`problems`]: Lasso, minimal-norm (Kaczmarz), ridge dual, and SVM
//!   hinge dual, all with incremental residual caches;
//! - [`solver`]: the iteration itself, its monotone safeguard variant, seeded
//!   reproducible runs, and seed ensembles;
//! - [`theory`]: sublinear/linear rate bounds, error-bound diagnostics, and
//!   duality-gap certificates to plot against measured curves.

pub mod block;
pub mod error;
pub mod io;
pub mod problems;
pub mod sampling;
pub mod smoothness;
pub mod solver;
pub mod sparse;
pub mod theory;

pub use block::{
    masked_update, weighted_norm_sq, weighted_norm_sq_flat, BlockPartition, BlockVector,
    DiagonalMetric, MetricKind,
};
pub use error::{Error, Result};
pub use problems::{
    make_lasso, make_min_norm_dual, make_ridge_dual, make_svm_dual, soft_threshold,
    CompositeProblem, SeparableProx, SmoothCache, SmoothOracle,
};
pub use sampling::{
    beta_by_enumeration, beta_closed_form_tau_nice, beta_doubly_uniform, beta_tau_nice,
    conservative_beta2, Atom, BetaConstants, BetaMethod, SamplingScheme,
};
pub use smoothness::{
    eso_slack_s1, eso_slack_s2, global_lipschitz_bounds, nu_s1, nu_s1_refined, nu_s2, nu_s3,
    verify_eso_s1, verify_eso_s2, Condition, EsoReport, SeparabilityStructure,
    SmoothnessCertificate,
};
pub use solver::{
    run, run_ensemble, run_with_observer, AveragedReport, RunReport, SolverConfig, StepEvent,
    StopReason, StopRule, TelemetryRow,
};
pub use theory::{
    duality_gap_lipschitz, duality_gap_strongly_convex, error_bound_iterate_rate,
    error_bound_rate, estimate_eb_constant, reference_solution, strong_convexity_constant,
    strong_convexity_rate, sublinear_bound, sublinear_bound_v2, RateBoundInputs,
    ReferenceSolution,
};
