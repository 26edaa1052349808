//! Error type shared by the solver components.

/// Errors raised by oracles, solvers and consistency checks.
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    /// The proximal subproblem is unbounded below: `gamma * rho >= 1`.
    #[error("stepsize gamma={gamma} too large for weak-convexity modulus rho={rho} (need gamma*rho < 1)")]
    StepsizeTooLarge { gamma: f64, rho: f64 },

    /// A vector had the wrong length for the operation.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Solver parameters outside their admissible range.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The `(s, u)` pair does not satisfy the prox optimality identity
    /// `0 = gamma * grad(phi1)(u) + u - s` within tolerance.
    #[error("inconsistent state: prox identity residual {residual:.3e} exceeds {tol:.3e}")]
    InconsistentState { residual: f64, tol: f64 },

    /// The envelope failed its sufficient-decrease bound, which signals a
    /// broken oracle (an inexact prox or a wrong Lipschitz constant).
    #[error("sufficient decrease violated at iteration {iter}: decrease {decrease:.3e} < bound {bound:.3e}")]
    DescentViolation {
        iter: usize,
        decrease: f64,
        bound: f64,
    },

    /// An oracle produced NaN or infinity.
    #[error("non-finite value produced at iteration {iter}")]
    NonFinite { iter: usize },

    /// Failure inside one scenario subproblem, tagged with its index.
    #[error("scenario {index}: {source}")]
    Scenario {
        index: usize,
        #[source]
        source: Box<SolverError>,
    },

    /// Two algebraically equivalent iteration paths drifted apart.
    #[error("paths diverged at iteration {iter}: deviation {deviation:.3e} exceeds {tol:.3e}")]
    PathsDiverged {
        iter: usize,
        deviation: f64,
        tol: f64,
    },

    /// A closed-form update disagreed with its reference formula.
    #[error("closed-form and reference updates disagree: deviation {deviation:.3e}")]
    UpdateMismatch { deviation: f64 },
}

impl SolverError {
    /// Wraps an error with the scenario index it came from.
    pub fn in_scenario(self, index: usize) -> Self {
        SolverError::Scenario {
            index,
            source: Box::new(self),
        }
    }
}
