//! Inner products and norms.
//!
//! Scenario-decomposed problems use the probability-weighted inner product
//! `<x, z> = sum_i p_i x_i' z_i` over block vectors, while everything else is
//! plain Euclidean. Every norm taken by the solvers goes through a
//! [`Geometry`] so the two cases share one code path.

use crate::error::SolverError;

/// The inner product a problem lives in.
#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Standard Euclidean inner product.
    Euclidean,
    /// Probability-weighted block inner product `sum_i p_i x_i' z_i`,
    /// over vectors made of `weights.len()` consecutive blocks of
    /// `block_dim` entries each.
    BlockWeighted { weights: Vec<f64>, block_dim: usize },
}

impl Geometry {
    /// Weighted consensus geometry for `probs.len()` blocks of `block_dim`.
    pub fn block_weighted(probs: &[f64], block_dim: usize) -> Self {
        Geometry::BlockWeighted {
            weights: probs.to_vec(),
            block_dim,
        }
    }

    /// Total vector length this geometry expects, if it is block structured.
    pub fn expected_len(&self) -> Option<usize> {
        match self {
            Geometry::Euclidean => None,
            Geometry::BlockWeighted { weights, block_dim } => Some(weights.len() * block_dim),
        }
    }

    pub fn check_len(&self, x: &[f64]) -> Result<(), SolverError> {
        if let Some(n) = self.expected_len() {
            if x.len() != n {
                return Err(SolverError::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            Geometry::Euclidean => dot(x, y),
            Geometry::BlockWeighted { weights, block_dim } => {
                debug_assert_eq!(x.len(), weights.len() * block_dim);
                let mut acc = 0.0;
                for (i, &p) in weights.iter().enumerate() {
                    let lo = i * block_dim;
                    let hi = lo + block_dim;
                    acc += p * dot(&x[lo..hi], &y[lo..hi]);
                }
                acc
            }
        }
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        self.dot(x, x)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.norm_sq(x).sqrt()
    }

    pub fn dist_sq(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            Geometry::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
            Geometry::BlockWeighted { weights, block_dim } => {
                let mut acc = 0.0;
                for (i, &p) in weights.iter().enumerate() {
                    let lo = i * block_dim;
                    let mut block = 0.0;
                    for j in lo..lo + block_dim {
                        let d = x[j] - y[j];
                        block += d * d;
                    }
                    acc += p * block;
                }
                acc
            }
        }
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        self.dist_sq(x, y).sqrt()
    }
}

/// Euclidean dot product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Euclidean squared norm.
pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// `x + alpha * y`, elementwise.
pub fn axpy(x: &[f64], alpha: f64, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a + alpha * b).collect()
}

/// `x - y`, elementwise.
pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// `alpha * x`, elementwise.
pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|a| alpha * a).collect()
}

/// `alpha * x + beta * y`, elementwise. Both algorithmic paths that shrink an
/// iterate toward a projection use this single helper so they agree bitwise.
pub fn lincomb(alpha: f64, x: &[f64], beta: f64, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| alpha * a + beta * b)
        .collect()
}

/// Relative deviation `||a - b|| / (1 + max(||a||, ||b||))` in `geom`.
pub fn relative_deviation(geom: &Geometry, a: &[f64], b: &[f64]) -> f64 {
    let scale = geom.norm(a).max(geom.norm(b));
    geom.dist(a, b) / (1.0 + scale)
}
