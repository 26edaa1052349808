//! Relaxed Douglas-Rachford splitting for weakly convex composite problems.
//!
//! The crate is organized around one engine and two specializations:
//!
//! - [`drs`]: the relaxed splitting iteration `u = prox_{gamma phi1}(s)`,
//!   `v in prox_{gamma phi2}(2u - s)`, `s' = s + lambda (v - u)`, monitored
//!   through the Douglas-Rachford envelope (a merit function that decreases
//!   every iteration for admissible stepsizes), with residual diagnostics and
//!   linear-rate estimation.
//! - [`penalty`]: constrained problems `min_{x in C} f(x)` handled through
//!   the smooth penalty `(mu/2) d_C^2`, which turns the engine into a
//!   projection / shifted-prox / dual-update pattern.
//! - [`hedging`]: scenario-decomposable problems coupled by a
//!   nonanticipativity subspace under the probability-weighted inner
//!   product, where the penalty pattern becomes a nonconvex progressive
//!   hedging method with independent per-scenario subproblems.
//!
//! [`phase`] adds the phase retrieval benchmark pieces (instance generation,
//! the closed-form subproblem solver, and the stochastic prox-linear and
//! progressive-decoupling baselines). [`numeric`] holds slow reference
//! oracles used only by tests.

pub mod drs;
pub mod error;
pub mod geometry;
pub mod hedging;
pub mod numeric;
pub mod oracle;
pub mod penalty;
pub mod phase;
pub mod set;

pub use drs::{
    drs_step, dre_value, estimate_linear_rate, residual, run, DrsParams, DrsState, RateEstimate,
    RunOutput, SplitProblem, StopReason, Trace,
};
pub use error::SolverError;
pub use geometry::Geometry;
pub use hedging::{ph_equivalence_check, ph_step, solve_ph, PhRun, PhState, ScenarioProblem};
pub use oracle::{moreau_envelope, prox_absolute_linear, ProxFn, SmoothFn};
pub use penalty::{alg1_step, equivalence_check, Alg1State, PenalizedProblem};
pub use phase::{
    pd_step, solve_subproblem_closed_form, spl_step, spp_reduction_check, PdState,
    PhaseRetrievalInstance, SubproblemInput,
};
pub use set::{project_consensus, ConvexSet};
