//! Constrained minimization via a squared-distance penalty.
//!
//! `min_{x in C} f(x)` is relaxed to `min_x f(x) + (mu/2) d_C^2(x)` and solved
//! by the splitting engine with the penalty as the smooth term (its gradient
//! is `mu (I - P_C)` with Lipschitz modulus `mu`). Spelling the generic
//! iteration out for this split gives the specialized update pattern
//!
//! ```text
//! z = s/(1 + gamma mu) + (gamma mu/(1 + gamma mu)) P_C(s)
//! w = mu (z - P_C(z))
//! x = argmin f(x) + <w, x> + ||x - z||^2/(2 gamma)    (= prox_{gamma f}(z - gamma w))
//! s' = s + lambda (x - z)
//! ```
//!
//! Both routes are kept: the specialized one for production use and the
//! generic engine as a per-iteration cross-check ([`equivalence_check`]).

use std::sync::Arc;

use crate::drs::{drs_step, DrsParams, DrsState, SplitProblem};
use crate::error::SolverError;
use crate::geometry::{self, Geometry};
use crate::oracle::{shrink_toward_projection, ProxFn, SquaredDistance};
use crate::set::ConvexSet;

/// A weakly convex objective with a convex feasible set, to be solved through
/// the penalty `f + (mu/2) d_C^2`.
#[derive(Clone)]
pub struct PenalizedProblem {
    pub f: Arc<dyn ProxFn>,
    pub set: Arc<ConvexSet>,
    pub mu: f64,
}

impl PenalizedProblem {
    pub fn new(f: Arc<dyn ProxFn>, set: Arc<ConvexSet>, mu: f64) -> Result<Self, SolverError> {
        if !(mu > 0.0) {
            return Err(SolverError::InvalidParams(format!(
                "penalty scaling must be positive, got {mu}"
            )));
        }
        Ok(PenalizedProblem { f, set, mu })
    }

    /// The derived smooth term `(mu/2) d_C^2`, with `L = mu`.
    pub fn smooth_term(&self) -> SquaredDistance {
        SquaredDistance::new(self.set.clone(), self.mu)
    }

    /// The penalized problem as a generic split problem in the set's
    /// geometry.
    pub fn split(&self) -> SplitProblem {
        SplitProblem::new(Arc::new(self.smooth_term()), self.f.clone())
            .with_geometry(self.set.geometry())
    }

    pub fn geometry(&self) -> Geometry {
        self.set.geometry()
    }

    /// Gradient Lipschitz modulus of the smooth term (`= mu`).
    pub fn lipschitz(&self) -> f64 {
        self.mu
    }

    /// `f(x) + (mu/2) d_C^2(z)`, the penalized objective along a primal pair.
    pub fn penalized_objective(&self, x: &[f64], z: &[f64]) -> f64 {
        self.f.value(x) + 0.5 * self.mu * self.set.distance_sq(z)
    }
}

/// One iterate of the penalty method: `z, w, x` are all computed at this
/// state's own `s`.
#[derive(Clone, Debug)]
pub struct Alg1State {
    pub s: Vec<f64>,
    /// Projection-shrunk iterate (the prox of the penalty term at `s`).
    pub z: Vec<f64>,
    /// Penalty gradient at `z`, acting as the dual-like price vector.
    pub w: Vec<f64>,
    /// Solution of the shifted subproblem.
    pub x: Vec<f64>,
    pub iter: usize,
}

impl Alg1State {
    pub fn init(problem: &PenalizedProblem, gamma: f64, s0: &[f64]) -> Result<Self, SolverError> {
        problem.geometry().check_len(s0)?;
        Self::at_point(problem, gamma, s0.to_vec(), 0)
    }

    fn at_point(
        problem: &PenalizedProblem,
        gamma: f64,
        s: Vec<f64>,
        iter: usize,
    ) -> Result<Self, SolverError> {
        let gm = gamma * problem.mu;
        let z = shrink_toward_projection(&s, &problem.set.project(&s), gm);
        let pz = problem.set.project(&z);
        let w: Vec<f64> = z.iter().zip(&pz).map(|(zi, pi)| problem.mu * (zi - pi)).collect();
        // Absorb the linear term into the prox center: the subproblem
        // min f(x) + <w, x> + ||x - z||^2/(2 gamma) is prox_{gamma f}(z - gamma w).
        let center = geometry::lincomb(1.0, &z, -gamma, &w);
        let x = problem.f.prox(gamma, &center);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { iter });
        }
        Ok(Alg1State { s, z, w, x, iter })
    }

    /// `||x - z||` in the problem geometry, the feasibility-style gap that
    /// vanishes on convergent runs.
    pub fn primal_gap(&self, geom: &Geometry) -> f64 {
        geom.dist(&self.x, &self.z)
    }
}

/// Advances one iteration of the penalty pattern.
pub fn alg1_step(
    problem: &PenalizedProblem,
    gamma: f64,
    lambda: f64,
    state: &Alg1State,
) -> Result<Alg1State, SolverError> {
    let direction = geometry::sub(&state.x, &state.z);
    let s_next = geometry::lincomb(1.0, &state.s, lambda, &direction);
    Alg1State::at_point(problem, gamma, s_next, state.iter + 1)
}

/// Outcome of a dual-path comparison.
#[derive(Clone, Copy, Debug)]
pub struct EquivalenceReport {
    pub iterations: usize,
    pub max_deviation: f64,
}

/// Runs the generic splitting engine on `(mu/2) d_C^2 + f` and the
/// specialized pattern side by side from the same start, comparing
/// `(u, z)`, `(v, x)` and `(s, s)` at every iteration. Returns the maximum
/// relative deviation seen, or fails at the first iteration whose deviation
/// exceeds `tol`.
pub fn equivalence_check(
    problem: &PenalizedProblem,
    gamma: f64,
    lambda: f64,
    s0: &[f64],
    iters: usize,
    tol: f64,
) -> Result<EquivalenceReport, SolverError> {
    let split = problem.split();
    let params = DrsParams::new(gamma, lambda).with_max_iter(iters);
    let geom = problem.geometry();

    let mut generic = DrsState::init(&split, &params, s0)?;
    let mut specialized = Alg1State::init(problem, gamma, s0)?;
    let mut max_deviation = 0.0f64;

    for k in 0..=iters {
        let dev = geometry::relative_deviation(&geom, &generic.u, &specialized.z)
            .max(geometry::relative_deviation(&geom, &generic.v, &specialized.x))
            .max(geometry::relative_deviation(&geom, &generic.s, &specialized.s));
        max_deviation = max_deviation.max(dev);
        if dev > tol {
            return Err(SolverError::PathsDiverged {
                iter: k,
                deviation: dev,
                tol,
            });
        }
        if k == iters {
            break;
        }
        generic = drs_step(&split, &params, &generic)?;
        specialized = alg1_step(problem, gamma, lambda, &specialized)?;
    }
    Ok(EquivalenceReport {
        iterations: iters,
        max_deviation,
    })
}
