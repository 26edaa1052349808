//! Relaxed Douglas-Rachford splitting with envelope-based monitoring.
//!
//! One iteration from the point `s`:
//!
//! ```text
//! u  = prox_{gamma phi1}(s)
//! v  in prox_{gamma phi2}(2u - s)
//! s' = s + lambda (v - u)
//! ```
//!
//! The Douglas-Rachford envelope (DRE) evaluated along the iterates,
//!
//! ```text
//! dre(s) = phi1(u) + <grad phi1(u), v - u> + phi2(v) + ||v - u||^2/(2 gamma),
//! ```
//!
//! decreases monotonically whenever `lambda` is in `(0, 2)` and
//! `gamma < (2 - lambda) / (2 L)`, which gives a cheap per-iteration health
//! check on the oracles and a merit function for rate diagnostics. The same
//! quantity equals the augmented Lagrangian of the consensus reformulation at
//! the primal-dual point `(u, v, (u - s)/gamma)`; the engine evaluates that
//! form (it needs no gradient call) and cross-checks the direct form when
//! debug assertions are on.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::SolverError;
use crate::geometry::{self, Geometry};
use crate::oracle::{ProxFn, SmoothFn};

/// Tolerance for the prox optimality identity `0 = gamma grad phi1(u) + u - s`.
pub const PROX_IDENTITY_TOL: f64 = 1e-9;
/// Absolute slack allowed on the sufficient-decrease inequality.
pub const DESCENT_SLACK: f64 = 1e-9;
/// Absolute slack on envelope monotonicity before a warning is flagged.
pub const MONOTONE_SLACK: f64 = 1e-10;
/// Relative agreement required between the two envelope formulas.
pub const DRE_FORMS_TOL: f64 = 1e-10;

/// The composite problem `min phi1 + phi2` handed to the engine: a smooth
/// term with exact prox, a prox-friendly term, and the inner product both
/// oracles are expressed in.
#[derive(Clone)]
pub struct SplitProblem {
    pub phi1: Arc<dyn SmoothFn>,
    pub phi2: Arc<dyn ProxFn>,
    pub geometry: Geometry,
}

impl SplitProblem {
    pub fn new(phi1: Arc<dyn SmoothFn>, phi2: Arc<dyn ProxFn>) -> Self {
        SplitProblem {
            phi1,
            phi2,
            geometry: Geometry::Euclidean,
        }
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    /// `phi1(x) + phi2(x)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.phi1.value(x) + self.phi2.value(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.phi1.lipschitz()
    }
}

/// Iteration parameters.
#[derive(Clone, Debug)]
pub struct DrsParams {
    /// Prox stepsize `gamma > 0`.
    pub gamma: f64,
    /// Relaxation `lambda` in `(0, 2)`.
    pub lambda: f64,
    /// Maximum number of steps.
    pub max_iter: usize,
    /// Stop when `|objective - reference_value| <= tol_objective`
    /// (only if a reference value is supplied).
    pub tol_objective: f64,
    /// Stop when the residual norm drops below this.
    pub tol_residual: f64,
    /// Known optimal (or reference) objective value, if any.
    pub reference_value: Option<f64>,
    /// Record every k-th iterate in the trace (1 keeps everything).
    pub trace_every: usize,
}

impl DrsParams {
    pub fn new(gamma: f64, lambda: f64) -> Self {
        DrsParams {
            gamma,
            lambda,
            max_iter: 1000,
            tol_objective: 0.0,
            tol_residual: 1e-10,
            reference_value: None,
            trace_every: 1,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol_residual(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    pub fn with_reference(mut self, value: f64, tol: f64) -> Self {
        self.reference_value = Some(value);
        self.tol_objective = tol;
        self
    }

    pub fn with_trace_every(mut self, every: usize) -> Self {
        self.trace_every = every.max(1);
        self
    }

    /// Sufficient-decrease constant `c = (2-lambda)/(2 lambda gamma) - L/lambda`.
    pub fn descent_constant(&self, lipschitz: f64) -> f64 {
        (2.0 - self.lambda) / (2.0 * self.lambda * self.gamma) - lipschitz / self.lambda
    }

    /// Checks `gamma`, `lambda` and the induced descent constant against the
    /// smooth term's Lipschitz modulus.
    pub fn validate(&self, lipschitz: f64) -> Result<(), SolverError> {
        if !(self.gamma > 0.0) {
            return Err(SolverError::InvalidParams(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.lambda > 0.0 && self.lambda < 2.0) {
            return Err(SolverError::InvalidParams(format!(
                "lambda must lie in (0, 2), got {}",
                self.lambda
            )));
        }
        if lipschitz > 0.0 && self.gamma >= (2.0 - self.lambda) / (2.0 * lipschitz) {
            return Err(SolverError::InvalidParams(format!(
                "gamma = {} outside (0, (2 - lambda)/(2 L)) = (0, {})",
                self.gamma,
                (2.0 - self.lambda) / (2.0 * lipschitz)
            )));
        }
        if self.descent_constant(lipschitz) <= 0.0 {
            return Err(SolverError::InvalidParams(
                "descent constant is not positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidParams("max_iter must be >= 1".into()));
        }
        if self.tol_objective < 0.0 || self.tol_residual < 0.0 {
            return Err(SolverError::InvalidParams(
                "tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One iterate of the splitting: the triple `(s, u, v)` with `u, v` computed
/// at this state's own `s`, plus derived monitoring quantities.
#[derive(Clone, Debug)]
pub struct DrsState {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iter: usize,
    /// Envelope value at `s`.
    pub dre: f64,
    /// Norm of the Lagrangian subgradient `(gamma^-1 (u - v), 0, u - v)`.
    pub residual_norm: f64,
    /// Envelope value of the previous iterate, if any.
    pub prev_dre: Option<f64>,
}

impl DrsState {
    /// Builds the iterate at `s0`: evaluates both proxes and the envelope.
    pub fn init(
        problem: &SplitProblem,
        params: &DrsParams,
        s0: &[f64],
    ) -> Result<Self, SolverError> {
        problem.geometry.check_len(s0)?;
        Self::at_point(problem, params, s0.to_vec(), 0, None)
    }

    fn at_point(
        problem: &SplitProblem,
        params: &DrsParams,
        s: Vec<f64>,
        iter: usize,
        prev_dre: Option<f64>,
    ) -> Result<Self, SolverError> {
        let gamma = params.gamma;
        let u = problem.phi1.prox(gamma, &s);
        if u.len() != s.len() {
            return Err(SolverError::DimensionMismatch {
                expected: s.len(),
                got: u.len(),
            });
        }
        let reflected = geometry::lincomb(2.0, &u, -1.0, &s);
        let v = problem.phi2.prox(gamma, &reflected);
        if v.len() != s.len() {
            return Err(SolverError::DimensionMismatch {
                expected: s.len(),
                got: v.len(),
            });
        }
        let dre = dre_lagrangian(problem, gamma, &s, &u, &v);
        let residual_norm = assembled_residual(&problem.geometry, gamma, &u, &v);
        if !dre.is_finite() || !residual_norm.is_finite() {
            return Err(SolverError::NonFinite { iter });
        }
        #[cfg(debug_assertions)]
        {
            let identity = prox_identity_residual(problem, gamma, &s, &u);
            debug_assert!(
                identity <= PROX_IDENTITY_TOL * (1.0 + problem.geometry.norm(&s)),
                "prox identity residual {identity:.3e} too large: inexact phi1 prox"
            );
            let direct = dre_direct(problem, gamma, &u, &v);
            debug_assert!(
                crate::numeric::rel_gap(dre, direct) <= DRE_FORMS_TOL,
                "envelope forms disagree: lagrangian {dre} vs direct {direct}"
            );
            let formula = residual(
                &problem.geometry,
                gamma,
                params.lambda,
                &s,
                &geometry::lincomb(1.0, &s, params.lambda, &geometry::sub(&v, &u)),
            );
            debug_assert!(
                crate::numeric::rel_gap(residual_norm, formula) <= 1e-12,
                "residual routes disagree: assembled {residual_norm} vs formula {formula}"
            );
        }
        Ok(DrsState {
            s,
            u,
            v,
            iter,
            dre,
            residual_norm,
            prev_dre,
        })
    }

    /// `phi1(u) + phi2(v)`, the objective along the two half-iterates.
    pub fn objective(&self, problem: &SplitProblem) -> f64 {
        problem.phi1.value(&self.u) + problem.phi2.value(&self.v)
    }

    /// `||s_next - s|| = lambda ||v - u||` for this state.
    pub fn step_norm(&self, geom: &Geometry, lambda: f64) -> f64 {
        lambda * geom.dist(&self.v, &self.u)
    }

    /// Whether the envelope increased beyond slack relative to the previous
    /// iterate.
    pub fn dre_increased(&self) -> bool {
        self.prev_dre
            .map(|prev| self.dre > prev + MONOTONE_SLACK)
            .unwrap_or(false)
    }
}

/// Advances one iteration: `s' = s + lambda (v - u)`, then re-evaluates both
/// proxes and the envelope at `s'`. Requires the input state's `(s, u, v)` to
/// be consistent (as produced by [`DrsState::init`] or this function).
pub fn drs_step(
    problem: &SplitProblem,
    params: &DrsParams,
    state: &DrsState,
) -> Result<DrsState, SolverError> {
    let direction = geometry::sub(&state.v, &state.u);
    let s_next = geometry::lincomb(1.0, &state.s, params.lambda, &direction);
    let next = DrsState::at_point(problem, params, s_next, state.iter + 1, Some(state.dre))?;
    if next.dre_increased() {
        log::warn!(
            "envelope increased at iteration {}: {} -> {}",
            next.iter,
            state.dre,
            next.dre
        );
    }
    Ok(next)
}

/// Residual of the prox optimality identity `0 = gamma grad phi1(u) + u - s`.
pub fn prox_identity_residual(
    problem: &SplitProblem,
    gamma: f64,
    s: &[f64],
    u: &[f64],
) -> f64 {
    let g = problem.phi1.gradient(u);
    let mut r = vec![0.0; s.len()];
    for i in 0..s.len() {
        r[i] = gamma * g[i] + u[i] - s[i];
    }
    problem.geometry.norm(&r)
}

/// Envelope via the augmented-Lagrangian form
/// `phi1(u) + phi2(v) + <y, u - v> + ||u - v||^2/(2 gamma)` with
/// `y = (u - s)/gamma`. No gradient call.
fn dre_lagrangian(problem: &SplitProblem, gamma: f64, s: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let geom = &problem.geometry;
    let uv = geometry::sub(u, v);
    let y = geometry::scale(1.0 / gamma, &geometry::sub(u, s));
    problem.phi1.value(u)
        + problem.phi2.value(v)
        + geom.dot(&y, &uv)
        + geom.norm_sq(&uv) / (2.0 * gamma)
}

/// Envelope via its definition,
/// `phi1(u) + <grad phi1(u), v - u> + phi2(v) + ||v - u||^2/(2 gamma)`.
fn dre_direct(problem: &SplitProblem, gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let geom = &problem.geometry;
    let vu = geometry::sub(v, u);
    let g = problem.phi1.gradient(u);
    problem.phi1.value(u)
        + geom.dot(&g, &vu)
        + problem.phi2.value(v)
        + geom.norm_sq(&vu) / (2.0 * gamma)
}

/// Envelope value at a consistent `(s, u, v)` triple. Returns an error when
/// the prox optimality identity fails beyond tolerance, which means `u` was
/// not produced by `prox_{gamma phi1}(s)`.
pub fn dre_value(
    problem: &SplitProblem,
    gamma: f64,
    s: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<f64, SolverError> {
    let identity = prox_identity_residual(problem, gamma, s, u);
    let tol = PROX_IDENTITY_TOL * (1.0 + problem.geometry.norm(s));
    if identity > tol {
        return Err(SolverError::InconsistentState {
            residual: identity,
            tol,
        });
    }
    let direct = dre_direct(problem, gamma, u, v);
    #[cfg(debug_assertions)]
    {
        let lagrangian = dre_lagrangian(problem, gamma, s, u, v);
        debug_assert!(
            crate::numeric::rel_gap(direct, lagrangian) <= DRE_FORMS_TOL,
            "envelope forms disagree: direct {direct} vs lagrangian {lagrangian}"
        );
    }
    Ok(direct)
}

/// Residual norm from the step length:
/// `||g|| = lambda^-1 sqrt(gamma^-2 + 1) ||s_next - s||`.
pub fn residual(geom: &Geometry, gamma: f64, lambda: f64, s: &[f64], s_next: &[f64]) -> f64 {
    (1.0 / lambda) * (1.0 / (gamma * gamma) + 1.0).sqrt() * geom.dist(s_next, s)
}

/// Residual norm by assembling the Lagrangian subgradient
/// `g = (gamma^-1 (u - v), 0, u - v)` and taking its norm directly.
pub fn assembled_residual(geom: &Geometry, gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let uv = geometry::sub(u, v);
    let first = geometry::scale(1.0 / gamma, &uv);
    (geom.norm_sq(&first) + geom.norm_sq(&uv)).sqrt()
}

/// One recorded iteration.
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub iter: usize,
    pub dre: f64,
    /// `phi1(u) + phi2(v)`.
    pub objective: f64,
    pub norm_u_minus_v: f64,
    /// `||s_next - s|| = lambda ||v - u||`.
    pub norm_s_step: f64,
    pub residual: f64,
}

/// Append-only record of a run, optionally decimated.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    rows: Vec<TraceRow>,
    every: usize,
}

impl Trace {
    pub fn new() -> Self {
        Trace {
            rows: Vec::new(),
            every: 1,
        }
    }

    pub fn with_decimation(every: usize) -> Self {
        Trace {
            rows: Vec::new(),
            every: every.max(1),
        }
    }

    pub fn record(&mut self, problem: &SplitProblem, params: &DrsParams, state: &DrsState) {
        if state.iter % self.every != 0 {
            return;
        }
        self.push_row(problem, params, state);
    }

    fn push_row(&mut self, problem: &SplitProblem, params: &DrsParams, state: &DrsState) {
        let geom = &problem.geometry;
        self.rows.push(TraceRow {
            iter: state.iter,
            dre: state.dre,
            objective: state.objective(problem),
            norm_u_minus_v: geom.dist(&state.u, &state.v),
            norm_s_step: state.step_norm(geom, params.lambda),
            residual: state.residual_norm,
        });
    }

    /// Appends an externally assembled row (used by drivers that iterate a
    /// specialized recursion rather than the generic engine).
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    /// Forces the final state into the trace even under decimation.
    pub fn record_final(&mut self, problem: &SplitProblem, params: &DrsParams, state: &DrsState) {
        if self.rows.last().map(|r| r.iter) != Some(state.iter) {
            self.push_row(problem, params, state);
        }
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dre_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.dre)
    }

    /// Writes `iter,dre,objective,norm_u_minus_v,norm_s_step,residual` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,dre,objective,norm_u_minus_v,norm_s_step,residual")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iter,
                fmt_float(r.dre),
                fmt_float(r.objective),
                fmt_float(r.norm_u_minus_v),
                fmt_float(r.norm_s_step),
                fmt_float(r.residual)
            )?;
        }
        Ok(())
    }
}

/// 17-significant-digit float formatting (exact f64 round trip).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    ResidualTolerance,
    ObjectiveTolerance,
    MaxIterations,
}

/// A finished run: final state, per-iteration trace, stop reason and the
/// number of (slack-exceeding) envelope increases observed.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: DrsState,
    pub trace: Trace,
    pub status: StopReason,
    pub nonmonotone_warnings: usize,
}

/// Iterates the splitting from `s0` until the residual tolerance, the
/// objective tolerance (when a reference value is configured), or the
/// iteration cap is reached.
///
/// Every step is checked against the sufficient-decrease inequality
///
/// ```text
/// dre_k - dre_{k+1} >= c * max(||s_k - s_{k+1}||^2/(1 + gamma L)^2,
///                              ||u_k - u_{k+1}||^2) - slack
/// ```
///
/// with `c = (2 - lambda)/(2 lambda gamma) - L/lambda`; a violation aborts
/// the run since it can only come from a broken oracle.
pub fn run(
    problem: &SplitProblem,
    params: &DrsParams,
    s0: &[f64],
) -> Result<RunOutput, SolverError> {
    let lipschitz = problem.lipschitz();
    params.validate(lipschitz)?;
    let c = params.descent_constant(lipschitz);
    let geom = &problem.geometry;
    let gamma_l = 1.0 + params.gamma * lipschitz;

    let mut state = DrsState::init(problem, params, s0)?;
    let mut trace = Trace::with_decimation(params.trace_every);
    trace.record(problem, params, &state);
    let mut warnings = 0usize;
    let mut status = StopReason::MaxIterations;

    for _ in 0..params.max_iter {
        let next = drs_step(problem, params, &state)?;
        let decrease = state.dre - next.dre;
        let bound = c
            * (geom.dist_sq(&state.s, &next.s) / (gamma_l * gamma_l))
                .max(geom.dist_sq(&state.u, &next.u));
        if decrease < bound - DESCENT_SLACK {
            return Err(SolverError::DescentViolation {
                iter: next.iter,
                decrease,
                bound,
            });
        }
        if next.dre_increased() {
            warnings += 1;
        }
        trace.record(problem, params, &next);
        state = next;

        if state.residual_norm <= params.tol_residual {
            status = StopReason::ResidualTolerance;
            break;
        }
        if let Some(reference) = params.reference_value {
            if (state.objective(problem) - reference).abs() <= params.tol_objective {
                status = StopReason::ObjectiveTolerance;
                break;
            }
        }
    }
    trace.record_final(problem, params, &state);
    Ok(RunOutput {
        state,
        trace,
        status,
        nonmonotone_warnings: warnings,
    })
}

/// Geometric decay estimate from a trace: the smallest window is the last
/// `min(100, #valid)` entries of `V_k = dre_k - reference` that stay above
/// the numerical floor.
#[derive(Clone, Copy, Debug)]
pub struct RateEstimate {
    /// `exp(slope)` of the least-squares fit of `log V_k`; `None` when the
    /// gap hits numerical zero before enough points accumulate.
    pub q_factor: Option<f64>,
    /// Number of points used by the fit.
    pub window: usize,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: Option<f64>,
}

/// Least-squares fit of `log(dre_k - reference_value)` over the trailing
/// window of a trace. Requires at least 20 recorded iterations and a
/// reference value no larger than the recorded envelope values (up to slack);
/// returns `q_factor: None` on degenerate data instead of failing.
pub fn estimate_linear_rate(trace: &Trace, reference_value: f64) -> RateEstimate {
    const MAX_WINDOW: usize = 100;
    const MIN_POINTS: usize = 10;

    let rows = trace.rows();
    if rows.len() < 20 {
        return RateEstimate {
            q_factor: None,
            window: 0,
            r_squared: None,
        };
    }
    let slack = 1e-9 * (1.0 + reference_value.abs());
    let floor = 100.0 * f64::EPSILON * (1.0 + reference_value.abs());
    let mut gaps: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for r in rows {
        let v = r.dre - reference_value;
        if v < -slack {
            // Reference above an envelope value: not a valid lower bound.
            return RateEstimate {
                q_factor: None,
                window: 0,
                r_squared: None,
            };
        }
        if v <= floor {
            break; // numerical zero reached; fit only what came before
        }
        gaps.push((r.iter as f64, v.ln()));
    }
    if gaps.len() < MIN_POINTS {
        return RateEstimate {
            q_factor: None,
            window: 0,
            r_squared: None,
        };
    }
    let window = gaps.len().min(MAX_WINDOW);
    let tail = &gaps[gaps.len() - window..];

    let n = tail.len() as f64;
    let mean_x = tail.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = tail.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in tail {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return RateEstimate {
            q_factor: None,
            window,
            r_squared: None,
        };
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    RateEstimate {
        q_factor: Some(slope.exp()),
        window,
        r_squared: Some(r_squared),
    }
}
