//! Slow reference oracles used by the test suites.
//!
//! Nothing here is meant for production paths: the solvers require exact
//! (closed-form) proximal maps. These routines exist so tests can check the
//! closed forms against an independent computation.

use crate::geometry::{self, Geometry};
use crate::oracle::SmoothFn;
use crate::set::ConvexSet;

/// Inner-loop tolerance of the numeric prox (on the step norm).
pub const NUMERIC_PROX_TOL: f64 = 1e-10;
/// Iteration cap of the numeric prox.
pub const NUMERIC_PROX_MAX_ITER: usize = 10_000;

/// Numeric `prox_{gamma f}(v)` for a smooth `f`, by gradient descent on the
/// strongly convex subproblem `f(x) + ||x - v||^2/(2 gamma)` with the fixed
/// step `1/(L + 1/gamma)`.
///
/// Panics if the loop does not reach the step tolerance within the iteration
/// cap; a reference oracle that did not converge must not be trusted.
pub fn numeric_prox_smooth(f: &dyn SmoothFn, gamma: f64, v: &[f64]) -> Vec<f64> {
    assert!(gamma > 0.0);
    let step = 1.0 / (f.lipschitz() + 1.0 / gamma);
    let mut x = v.to_vec();
    for _ in 0..NUMERIC_PROX_MAX_ITER {
        let g = f.gradient(&x);
        let mut sq = 0.0;
        for i in 0..x.len() {
            let d = step * (g[i] + (x[i] - v[i]) / gamma);
            x[i] -= d;
            sq += d * d;
        }
        if sq.sqrt() <= NUMERIC_PROX_TOL {
            return x;
        }
    }
    panic!("numeric prox did not converge within {NUMERIC_PROX_MAX_ITER} iterations");
}

/// Numeric `prox_{gamma f}(v)` for `f = smooth + indicator(set)`, by projected
/// gradient on the subproblem. Pass `None` for a bare indicator.
pub fn numeric_prox_projected(
    smooth: Option<&dyn SmoothFn>,
    set: &ConvexSet,
    gamma: f64,
    v: &[f64],
) -> Vec<f64> {
    assert!(gamma > 0.0);
    let lip = smooth.map_or(0.0, SmoothFn::lipschitz);
    let step = 1.0 / (lip + 1.0 / gamma);
    let geom = set.geometry();
    let mut x = set.project(v);
    for _ in 0..NUMERIC_PROX_MAX_ITER {
        let g = smooth.map(|f| f.gradient(&x));
        let mut y = x.clone();
        for i in 0..x.len() {
            let grad = g.as_ref().map_or(0.0, |g| g[i]) + (x[i] - v[i]) / gamma;
            y[i] -= step * grad;
        }
        let next = set.project(&y);
        let moved = geom.dist(&next, &x);
        x = next;
        if moved <= NUMERIC_PROX_TOL {
            return x;
        }
    }
    panic!("projected numeric prox did not converge within {NUMERIC_PROX_MAX_ITER} iterations");
}

/// Dense 1-d grid minimizer of `f` on `[lo, hi]` with `points` samples.
/// Returns the best abscissa and value.
pub fn grid_min_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    assert!(points >= 2 && hi > lo);
    let h = (hi - lo) / (points - 1) as f64;
    let mut best_x = lo;
    let mut best_f = f(lo);
    for k in 1..points {
        let x = lo + h * k as f64;
        let fx = f(x);
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
    }
    (best_x, best_f)
}

/// Dense 2-d grid minimizer of `f` on `[lo, hi]^2` with `points` samples per
/// axis. Returns the best point and value.
pub fn grid_min_2d(
    f: impl Fn(f64, f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> ([f64; 2], f64) {
    assert!(points >= 2 && hi > lo);
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = [lo, lo];
    let mut best_f = f(lo, lo);
    for i in 0..points {
        let x = lo + h * i as f64;
        for j in 0..points {
            let y = lo + h * j as f64;
            let fxy = f(x, y);
            if fxy < best_f {
                best_f = fxy;
                best = [x, y];
            }
        }
    }
    (best, best_f)
}

/// Locates a sign change of `g` on a 1-d grid over `[lo, hi]` (step `h`) and
/// returns the midpoint of the bracketing cell, if any. Used as an
/// independent criticality check for 1-d composite problems.
pub fn grid_sign_change(g: impl Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> Option<f64> {
    let mut x = lo;
    let mut gx = g(x);
    while x < hi {
        let xn = x + h;
        let gn = g(xn);
        if gx == 0.0 {
            return Some(x);
        }
        if gx * gn < 0.0 {
            return Some(0.5 * (x + xn));
        }
        x = xn;
        gx = gn;
    }
    None
}

/// Relative gap helper used across the test suites.
pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Euclidean relative deviation between two vectors.
pub fn rel_vec_gap(a: &[f64], b: &[f64]) -> f64 {
    geometry::relative_deviation(&Geometry::Euclidean, a, b)
}
