//! Function oracles: smooth terms, prox-friendly terms, and the Moreau
//! envelope.
//!
//! All oracles are pure after construction and safe to share across threads.
//! An oracle's `value`, `gradient` and `prox` are all understood with respect
//! to one fixed inner product (Euclidean unless stated otherwise); mixing
//! geometries between the two terms of a split problem is a caller bug.

use std::sync::Arc;

use crate::error::SolverError;
use crate::geometry::{self, Geometry};
use crate::set::ConvexSet;

/// An L-smooth function: finite everywhere, with an L-Lipschitz gradient and
/// an exactly computable proximal map.
///
/// The prox is required because the splitting iteration takes a proximal step
/// on the smooth term as well; every implementation here has a closed form.
pub trait SmoothFn: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Lipschitz modulus of the gradient.
    fn lipschitz(&self) -> f64;
    /// `argmin_u value(u) + ||u - v||^2 / (2 gamma)`.
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64>;
}

/// A proper lower semicontinuous function accessed through its proximal map.
/// `value` may return `f64::INFINITY` outside the domain. For set-valued
/// proximal maps (weakly convex case with large stepsizes) the oracle returns
/// one deterministic element.
pub trait ProxFn: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// `argmin_u value(u) + ||u - v||^2 / (2 gamma)`.
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64>;
    /// Weak-convexity modulus rho: `value + (rho/2)||.||^2` is convex.
    /// Zero means the function is convex.
    fn weak_convexity(&self) -> f64 {
        0.0
    }
}

/// Exposes a (convex) smooth oracle through the nonsmooth-term interface.
pub struct AsProx<T>(pub T);

impl<T: SmoothFn> ProxFn for AsProx<T> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        self.0.prox(gamma, v)
    }
}

/// The zero function.
#[derive(Clone, Debug, Default)]
pub struct Zero;

impl SmoothFn for Zero {
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn prox(&self, _gamma: f64, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
}

/// `(c/2) ||x - center||^2`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub curvature: f64,
    pub center: Vec<f64>,
}

impl Quadratic {
    pub fn new(curvature: f64, center: Vec<f64>) -> Self {
        assert!(curvature >= 0.0, "curvature must be nonnegative");
        Quadratic { curvature, center }
    }

    /// `(c/2) ||x||^2` in dimension `n`.
    pub fn centered(curvature: f64, n: usize) -> Self {
        Quadratic::new(curvature, vec![0.0; n])
    }
}

impl SmoothFn for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature * Geometry::Euclidean.dist_sq(x, &self.center)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(v, c)| self.curvature * (v - c))
            .collect()
    }
    fn lipschitz(&self) -> f64 {
        self.curvature
    }
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        // argmin (c/2)||u - z||^2 + ||u - v||^2/(2 gamma) = (v + gamma c z)/(1 + gamma c)
        let gc = gamma * self.curvature;
        v.iter()
            .zip(&self.center)
            .map(|(vi, zi)| (vi + gc * zi) / (1.0 + gc))
            .collect()
    }
}

/// `(mu/2) d_C^2(x)`, the squared-distance penalty of a convex set. Gradient
/// `mu (x - P_C(x))` with Lipschitz modulus `mu`; its prox shrinks toward the
/// projection. Value, gradient and prox are all taken in the set's geometry.
#[derive(Clone, Debug)]
pub struct SquaredDistance {
    pub set: Arc<ConvexSet>,
    pub mu: f64,
}

impl SquaredDistance {
    pub fn new(set: Arc<ConvexSet>, mu: f64) -> Self {
        assert!(mu > 0.0, "penalty scaling must be positive");
        SquaredDistance { set, mu }
    }
}

impl SmoothFn for SquaredDistance {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.mu * self.set.distance_sq(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = self.set.project(x);
        x.iter().zip(&p).map(|(v, pv)| self.mu * (v - pv)).collect()
    }
    fn lipschitz(&self) -> f64 {
        self.mu
    }
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        shrink_toward_projection(v, &self.set.project(v), gamma * self.mu)
    }
}

/// `(1/(1+t)) v + (t/(1+t)) p` with `t = gamma * mu`: the prox of the
/// squared-distance penalty. Shared so that every algorithmic path computes
/// the identical floating-point result.
pub fn shrink_toward_projection(v: &[f64], p: &[f64], t: f64) -> Vec<f64> {
    geometry::lincomb(1.0 / (1.0 + t), v, t / (1.0 + t), p)
}

/// The l1 norm `sum_i |x_i|` (convex).
#[derive(Clone, Debug, Default)]
pub struct AbsValue;

impl ProxFn for AbsValue {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&vi| soft_threshold(vi, gamma)).collect()
    }
}

/// Coordinate-separable weakly convex model `sum_i |x_i| - (rho/2) x_i^2`.
/// Prox is the soft threshold rescaled by `1/(1 - gamma rho)`, valid for
/// `gamma rho < 1`.
#[derive(Clone, Debug)]
pub struct WeaklyConvexAbs {
    pub rho: f64,
}

impl WeaklyConvexAbs {
    pub fn new(rho: f64) -> Self {
        assert!((0.0..1.0).contains(&rho) || rho >= 0.0);
        WeaklyConvexAbs { rho }
    }
}

impl ProxFn for WeaklyConvexAbs {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs() - 0.5 * self.rho * v * v).sum()
    }
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        assert!(
            gamma * self.rho < 1.0,
            "prox subproblem not strongly convex: gamma*rho = {} >= 1",
            gamma * self.rho
        );
        v.iter()
            .map(|&vi| soft_threshold(vi, gamma) / (1.0 - gamma * self.rho))
            .collect()
    }
    fn weak_convexity(&self) -> f64 {
        self.rho
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Indicator of a convex set: zero on the set, `+inf` outside. Its prox is
/// the projection. Membership for `value` is decided up to a small distance
/// tolerance so that freshly projected points evaluate to zero.
#[derive(Clone, Debug)]
pub struct Indicator {
    pub set: Arc<ConvexSet>,
    membership_tol: f64,
}

impl Indicator {
    pub fn new(set: Arc<ConvexSet>) -> Self {
        Indicator {
            set,
            membership_tol: 1e-10,
        }
    }
}

impl ProxFn for Indicator {
    fn value(&self, x: &[f64]) -> f64 {
        let scale = 1.0 + self.set.geometry().norm(x);
        if self.set.distance_sq(x).sqrt() <= self.membership_tol * scale {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, _gamma: f64, v: &[f64]) -> Vec<f64> {
        self.set.project(v)
    }
}

/// Weighted sum of per-scenario terms `sum_i p_i f_i(x_i)` over a block
/// vector, under the probability-weighted inner product. In that geometry its
/// prox decomposes into the plain per-block proxes (the weights cancel).
pub struct BlockSeparable {
    components: Vec<Arc<dyn ProxFn>>,
    probs: Vec<f64>,
    block_dim: usize,
}

impl BlockSeparable {
    pub fn new(
        components: Vec<Arc<dyn ProxFn>>,
        probs: Vec<f64>,
        block_dim: usize,
    ) -> Result<Self, SolverError> {
        if components.len() != probs.len() {
            return Err(SolverError::DimensionMismatch {
                expected: probs.len(),
                got: components.len(),
            });
        }
        Ok(BlockSeparable {
            components,
            probs,
            block_dim,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.components.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::block_weighted(&self.probs, self.block_dim)
    }
}

impl ProxFn for BlockSeparable {
    fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_blocks() * self.block_dim);
        self.components
            .iter()
            .zip(&self.probs)
            .enumerate()
            .map(|(i, (f, &p))| {
                p * f.value(&x[i * self.block_dim..(i + 1) * self.block_dim])
            })
            .sum()
    }
    fn prox(&self, gamma: f64, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_blocks() * self.block_dim);
        let mut out = Vec::with_capacity(v.len());
        for (i, f) in self.components.iter().enumerate() {
            let block = f.prox(gamma, &v[i * self.block_dim..(i + 1) * self.block_dim]);
            debug_assert_eq!(block.len(), self.block_dim);
            out.extend_from_slice(&block);
        }
        out
    }
    fn weak_convexity(&self) -> f64 {
        self.components
            .iter()
            .map(|f| f.weak_convexity())
            .fold(0.0, f64::max)
    }
}

/// Moreau envelope `min_u f(u) + ||u - v||^2/(2 gamma)`, evaluated through the
/// oracle's prox (Euclidean geometry).
pub fn moreau_envelope(f: &dyn ProxFn, gamma: f64, v: &[f64]) -> Result<f64, SolverError> {
    moreau_envelope_in(&Geometry::Euclidean, f, gamma, v)
}

/// Moreau envelope in an explicit geometry.
pub fn moreau_envelope_in(
    geom: &Geometry,
    f: &dyn ProxFn,
    gamma: f64,
    v: &[f64],
) -> Result<f64, SolverError> {
    if gamma <= 0.0 {
        return Err(SolverError::InvalidParams(format!(
            "stepsize must be positive, got {gamma}"
        )));
    }
    let rho = f.weak_convexity();
    if gamma * rho >= 1.0 {
        return Err(SolverError::StepsizeTooLarge { gamma, rho });
    }
    let p = f.prox(gamma, v);
    Ok(f.value(&p) + geom.dist_sq(&p, v) / (2.0 * gamma))
}

/// Minimizer of `|r + <c, x - x0>| + ||x - x0||^2/(2 gamma)`: the prox-linear
/// model step shared by the stochastic prox-linear baseline. The minimizer is
/// `x0 - t c` with `t = sign(r) min(|r|/||c||^2, gamma)`; a zero slope returns
/// `x0` unchanged.
pub fn prox_absolute_linear(c: &[f64], r: f64, gamma: f64, x0: &[f64]) -> Vec<f64> {
    debug_assert!(gamma > 0.0);
    debug_assert_eq!(c.len(), x0.len());
    let csq = geometry::norm_sq(c);
    if csq == 0.0 || r == 0.0 {
        return x0.to_vec();
    }
    let t = r.signum() * (r.abs() / csq).min(gamma);
    geometry::axpy(x0, -t, c)
}
