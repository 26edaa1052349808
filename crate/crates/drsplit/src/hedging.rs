//! Scenario decomposition: a nonconvex progressive hedging method.
//!
//! For `min sum_i p_i f_i(x_i)` subject to the nonanticipativity subspace
//! `N = { x_1 = ... = x_N }` (or a user-supplied projector), the penalty
//! pattern with `C = N` under the probability-weighted inner product splits
//! into independent per-scenario subproblems:
//!
//! ```text
//! x_i  = argmin f_i(x_i) + <w_i, x_i> + |x_i - z_i|^2/(2 gamma)
//! s_i' = s_i + lambda (x_i - z_i)
//! sN'  = P_N(s'),   w_i' = mu/(1 + gamma mu) (s_i' - sN_i')
//! z_i' = s_i'/(1 + gamma mu) + (gamma mu/(1 + gamma mu)) sN_i'
//! ```
//!
//! The dual iterate `w` stays in `N`-perpendicular (in the weighted inner
//! product) by construction. The per-scenario subproblems are independent;
//! their results are always reduced in fixed scenario order so runs are
//! deterministic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::drs::{assembled_residual, dre_value, DrsParams, StopReason, Trace};
use crate::error::SolverError;
use crate::geometry::{self, Geometry};
use crate::oracle::{shrink_toward_projection, AsProx, BlockSeparable, ProxFn, Quadratic, Zero};
use crate::penalty::{alg1_step, Alg1State, EquivalenceReport, PenalizedProblem};
use crate::phase::PhaseComponent;
use crate::set::ConvexSet;

/// Feasibility tolerance for start points that must lie in the subspace.
const START_FEASIBILITY_TOL: f64 = 1e-9;

/// A scenario-decomposable problem: per-scenario objectives with
/// probabilities, the coupling subspace, and the penalty scaling.
#[derive(Clone)]
pub struct ScenarioProblem {
    components: Vec<Arc<dyn ProxFn>>,
    probs: Vec<f64>,
    block_dim: usize,
    subspace: Arc<ConvexSet>,
    pub mu: f64,
}

impl ScenarioProblem {
    /// Scenario problem coupled through the one-stage consensus subspace.
    pub fn consensus(
        components: Vec<Arc<dyn ProxFn>>,
        probs: Vec<f64>,
        block_dim: usize,
        mu: f64,
    ) -> Result<Self, SolverError> {
        let subspace = Arc::new(ConvexSet::consensus(probs.clone(), block_dim)?);
        Self::with_subspace(components, probs, block_dim, subspace, mu)
    }

    /// Scenario problem coupled through an arbitrary subspace projector
    /// (multistage nonanticipativity structures enter here).
    pub fn with_subspace(
        components: Vec<Arc<dyn ProxFn>>,
        probs: Vec<f64>,
        block_dim: usize,
        subspace: Arc<ConvexSet>,
        mu: f64,
    ) -> Result<Self, SolverError> {
        if components.len() != probs.len() {
            return Err(SolverError::DimensionMismatch {
                expected: probs.len(),
                got: components.len(),
            });
        }
        if subspace.dim() != components.len() * block_dim {
            return Err(SolverError::DimensionMismatch {
                expected: components.len() * block_dim,
                got: subspace.dim(),
            });
        }
        if !(mu > 0.0) {
            return Err(SolverError::InvalidParams(format!(
                "penalty scaling must be positive, got {mu}"
            )));
        }
        Ok(ScenarioProblem {
            components,
            probs,
            block_dim,
            subspace,
            mu,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.components.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn total_dim(&self) -> usize {
        self.components.len() * self.block_dim
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn component(&self, i: usize) -> &Arc<dyn ProxFn> {
        &self.components[i]
    }

    pub fn subspace(&self) -> &Arc<ConvexSet> {
        &self.subspace
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::block_weighted(&self.probs, self.block_dim)
    }

    /// `f(x) = sum_i p_i f_i(x_i)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(&self.probs)
            .enumerate()
            .map(|(i, (f, &p))| p * f.value(self.block(x, i)))
            .sum()
    }

    /// `f(x) + (mu/2) d_N^2(z)`.
    pub fn penalized_objective(&self, x: &[f64], z: &[f64]) -> f64 {
        self.objective(x) + 0.5 * self.mu * self.subspace.distance_sq(z)
    }

    /// The same problem seen by the constrained-penalty pattern.
    pub fn as_penalized(&self) -> Result<PenalizedProblem, SolverError> {
        let aggregate = BlockSeparable::new(
            self.components.clone(),
            self.probs.clone(),
            self.block_dim,
        )?;
        PenalizedProblem::new(Arc::new(aggregate), self.subspace.clone(), self.mu)
    }

    /// Weighted-mean block of `x` (the deployable consensus point).
    pub fn consensus_point(&self, x: &[f64]) -> Vec<f64> {
        let mut mean = vec![0.0; self.block_dim];
        for (i, &p) in self.probs.iter().enumerate() {
            for (m, &v) in mean.iter_mut().zip(self.block(x, i)) {
                *m += p * v;
            }
        }
        mean
    }

    pub fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * self.block_dim..(i + 1) * self.block_dim]
    }

    fn check_start(&self, z0: &[f64]) -> Result<(), SolverError> {
        self.geometry().check_len(z0)?;
        let gap = self.subspace.distance_sq(z0).sqrt();
        let tol = START_FEASIBILITY_TOL * (1.0 + self.geometry().norm(z0));
        if gap > tol {
            return Err(SolverError::InvalidParams(format!(
                "start point must lie in the coupling subspace (gap {gap:.3e})"
            )));
        }
        Ok(())
    }
}

/// One iterate of the hedging method; all fields are computed at this state's
/// own `s`.
#[derive(Clone, Debug)]
pub struct PhState {
    pub s: Vec<f64>,
    /// `P_N(s)`.
    pub s_n: Vec<f64>,
    /// Dual iterate, in `N`-perpendicular.
    pub w: Vec<f64>,
    /// Primal iterate (shrunk toward the subspace).
    pub z: Vec<f64>,
    /// Per-scenario subproblem solutions.
    pub x: Vec<f64>,
    pub iter: usize,
}

impl PhState {
    /// Builds the iterate at a feasible start `z0` (so `s = z0`, the dual
    /// starts at zero up to roundoff, and `z = z0`).
    pub fn init(
        problem: &ScenarioProblem,
        gamma: f64,
        z0: &[f64],
    ) -> Result<Self, SolverError> {
        problem.check_start(z0)?;
        Self::at_point(problem, gamma, z0.to_vec(), 0)
    }

    fn at_point(
        problem: &ScenarioProblem,
        gamma: f64,
        s: Vec<f64>,
        iter: usize,
    ) -> Result<Self, SolverError> {
        let gm = gamma * problem.mu;
        let s_n = problem.subspace.project(&s);
        let dual_scale = problem.mu / (1.0 + gm);
        let w: Vec<f64> = s
            .iter()
            .zip(&s_n)
            .map(|(si, ni)| dual_scale * (si - ni))
            .collect();
        let z = shrink_toward_projection(&s, &s_n, gm);
        let x = solve_scenario_subproblems(problem, gamma, &z, &w, iter)?;
        Ok(PhState { s, s_n, w, z, x, iter })
    }

    /// `||x - P_N(x)||` in the weighted geometry.
    pub fn consensus_gap(&self, problem: &ScenarioProblem) -> f64 {
        let px = problem.subspace.project(&self.x);
        problem.geometry().dist(&self.x, &px)
    }
}

/// Solves every scenario subproblem `min f_i + <w_i, .> + |. - z_i|^2/(2 gamma)`
/// (independent; results reduced in fixed scenario order).
fn solve_scenario_subproblems(
    problem: &ScenarioProblem,
    gamma: f64,
    z: &[f64],
    w: &[f64],
    iter: usize,
) -> Result<Vec<f64>, SolverError> {
    let bd = problem.block_dim;
    let mut x = vec![0.0; problem.total_dim()];
    for (i, f) in problem.components.iter().enumerate() {
        let zi = &z[i * bd..(i + 1) * bd];
        let wi = &w[i * bd..(i + 1) * bd];
        let center = geometry::lincomb(1.0, zi, -gamma, wi);
        let sol = f.prox(gamma, &center);
        if sol.len() != bd {
            return Err(SolverError::DimensionMismatch {
                expected: bd,
                got: sol.len(),
            }
            .in_scenario(i));
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { iter }.in_scenario(i));
        }
        x[i * bd..(i + 1) * bd].copy_from_slice(&sol);
    }
    Ok(x)
}

/// Advances one hedging iteration.
pub fn ph_step(
    problem: &ScenarioProblem,
    gamma: f64,
    lambda: f64,
    state: &PhState,
) -> Result<PhState, SolverError> {
    let direction = geometry::sub(&state.x, &state.z);
    let s_next = geometry::lincomb(1.0, &state.s, lambda, &direction);
    PhState::at_point(problem, gamma, s_next, state.iter + 1)
}

/// Runs the hedging recursion and the constrained-penalty pattern on
/// `C = N` side by side, comparing `(z, x, s, w)` each iteration in the
/// weighted geometry.
pub fn ph_equivalence_check(
    problem: &ScenarioProblem,
    gamma: f64,
    lambda: f64,
    s0: &[f64],
    iters: usize,
    tol: f64,
) -> Result<EquivalenceReport, SolverError> {
    let penalized = problem.as_penalized()?;
    let geom = problem.geometry();

    let mut hedging = PhState::init(problem, gamma, s0)?;
    let mut pattern = Alg1State::init(&penalized, gamma, s0)?;
    let mut max_deviation = 0.0f64;

    for k in 0..=iters {
        let dev = geometry::relative_deviation(&geom, &hedging.z, &pattern.z)
            .max(geometry::relative_deviation(&geom, &hedging.x, &pattern.x))
            .max(geometry::relative_deviation(&geom, &hedging.s, &pattern.s))
            .max(geometry::relative_deviation(&geom, &hedging.w, &pattern.w));
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
        hedging = ph_step(problem, gamma, lambda, &hedging)?;
        pattern = alg1_step(&penalized, gamma, lambda, &pattern)?;
    }
    Ok(EquivalenceReport {
        iterations: iters,
        max_deviation,
    })
}

/// A finished hedging run.
#[derive(Clone, Debug)]
pub struct PhRun {
    pub state: PhState,
    pub trace: Trace,
    pub status: StopReason,
    /// `||x - P_N(x)||` per recorded iteration.
    pub consensus_gaps: Vec<f64>,
    pub nonmonotone_warnings: usize,
}

/// Iterates [`ph_step`] from a feasible `z0` under the usual stopping rules,
/// with the same envelope bookkeeping (and sufficient-decrease screening) as
/// the generic engine.
pub fn solve_ph(
    problem: &ScenarioProblem,
    params: &DrsParams,
    z0: &[f64],
) -> Result<PhRun, SolverError> {
    params.validate(problem.mu)?;
    let split = problem.as_penalized()?.split();
    let geom = problem.geometry();
    let c = params.descent_constant(problem.mu);
    let gamma_l = 1.0 + params.gamma * problem.mu;

    let mut state = PhState::init(problem, params.gamma, z0)?;
    let mut dre = dre_value(&split, params.gamma, &state.s, &state.z, &state.x)?;
    let mut trace = Trace::with_decimation(params.trace_every);
    let mut consensus_gaps = Vec::new();
    let mut warnings = 0usize;
    let mut status = StopReason::MaxIterations;

    let record =
        |trace: &mut Trace, gaps: &mut Vec<f64>, st: &PhState, dre: f64| {
            if st.iter % params.trace_every == 0 {
                trace.push(crate::drs::TraceRow {
                    iter: st.iter,
                    dre,
                    objective: problem.penalized_objective(&st.x, &st.z),
                    norm_u_minus_v: geom.dist(&st.z, &st.x),
                    norm_s_step: params.lambda * geom.dist(&st.x, &st.z),
                    residual: assembled_residual(&geom, params.gamma, &st.z, &st.x),
                });
                gaps.push(st.consensus_gap(problem));
            }
        };
    record(&mut trace, &mut consensus_gaps, &state, dre);

    for _ in 0..params.max_iter {
        let next = ph_step(problem, params.gamma, params.lambda, &state)?;
        let next_dre = dre_value(&split, params.gamma, &next.s, &next.z, &next.x)?;
        let decrease = dre - next_dre;
        let bound = c
            * (geom.dist_sq(&state.s, &next.s) / (gamma_l * gamma_l))
                .max(geom.dist_sq(&state.z, &next.z));
        if decrease < bound - crate::drs::DESCENT_SLACK {
            return Err(SolverError::DescentViolation {
                iter: next.iter,
                decrease,
                bound,
            });
        }
        if next_dre > dre + crate::drs::MONOTONE_SLACK {
            warnings += 1;
        }
        state = next;
        dre = next_dre;
        record(&mut trace, &mut consensus_gaps, &state, dre);

        let residual = assembled_residual(&geom, params.gamma, &state.z, &state.x);
        if residual <= params.tol_residual {
            status = StopReason::ResidualTolerance;
            break;
        }
        if let Some(reference) = params.reference_value {
            let obj = problem.penalized_objective(&state.x, &state.z);
            if (obj - reference).abs() <= params.tol_objective {
                status = StopReason::ObjectiveTolerance;
                break;
            }
        }
    }
    Ok(PhRun {
        state,
        trace,
        status,
        consensus_gaps,
        nonmonotone_warnings: warnings,
    })
}

/// On-disk description of a scenario problem.
///
/// ```json
/// {
///   "probabilities": [0.5, 0.5],
///   "scenario_dim": 2,
///   "mu": 1.0,
///   "objectives": [
///     {"kind": "quadratic", "curvature": 1.0, "center": [0.0, 0.0]},
///     {"kind": "abs_quadratic_residual", "a": [1.0, 0.0], "b": 4.0}
///   ]
/// }
/// ```
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioFile {
    pub probabilities: Vec<f64>,
    pub scenario_dim: usize,
    pub mu: f64,
    pub objectives: Vec<ObjectiveSpec>,
}

/// Serializable objective descriptions for scenario files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Zero,
    /// `(curvature/2) |x - center|^2`
    Quadratic { curvature: f64, center: Vec<f64> },
    /// `|<a, x>^2 - b|`
    AbsQuadraticResidual { a: Vec<f64>, b: f64 },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Arc<dyn ProxFn> {
        match self {
            ObjectiveSpec::Zero => Arc::new(AsProx(Zero)),
            ObjectiveSpec::Quadratic { curvature, center } => {
                Arc::new(AsProx(Quadratic::new(*curvature, center.clone())))
            }
            ObjectiveSpec::AbsQuadraticResidual { a, b } => {
                Arc::new(PhaseComponent::new(a.clone(), *b))
            }
        }
    }
}

impl ScenarioFile {
    pub fn to_problem(&self) -> Result<ScenarioProblem, SolverError> {
        let components = self.objectives.iter().map(ObjectiveSpec::build).collect();
        ScenarioProblem::consensus(
            components,
            self.probabilities.clone(),
            self.scenario_dim,
            self.mu,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        serde_json::from_str(text)
            .map_err(|e| SolverError::InvalidParams(format!("scenario file: {e}")))
    }
}
