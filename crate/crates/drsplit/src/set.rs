//! Closed convex sets represented by their projection oracle.

use std::fmt;
use std::sync::Arc;

use crate::error::SolverError;
use crate::geometry::{self, Geometry};

/// A nonempty closed convex set, known to the solvers only through its
/// projection map. The projection is taken with respect to the set's declared
/// inner product: Euclidean for subspaces, boxes and balls, probability
/// weighted for the consensus subspace.
#[derive(Clone)]
pub enum ConvexSet {
    /// Linear subspace given by its (symmetric, idempotent) projector matrix,
    /// stored row-major.
    Subspace { projector: Vec<f64>, dim: usize },
    /// Axis-aligned box `[lower_i, upper_i]` per coordinate.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball of given center and radius (radius zero is a point).
    Ball { center: Vec<f64>, radius: f64 },
    /// Consensus subspace `{ (x_1, ..., x_N) : x_1 = ... = x_N }` of block
    /// vectors, under the probability-weighted inner product.
    Consensus { probs: Vec<f64>, block_dim: usize },
    /// User-supplied projector (e.g. a multistage nonanticipativity
    /// subspace), together with the inner product it projects under.
    Projector {
        project: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
        geometry: Geometry,
        dim: usize,
    },
}

impl fmt::Debug for ConvexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexSet::Subspace { dim, .. } => write!(f, "Subspace(dim={dim})"),
            ConvexSet::Box { lower, .. } => write!(f, "Box(n={})", lower.len()),
            ConvexSet::Ball { center, radius } => {
                write!(f, "Ball(n={}, r={radius})", center.len())
            }
            ConvexSet::Consensus { probs, block_dim } => {
                write!(f, "Consensus(blocks={}, dim={block_dim})", probs.len())
            }
            ConvexSet::Projector { dim, .. } => write!(f, "Projector(n={dim})"),
        }
    }
}

impl ConvexSet {
    /// Subspace spanned by the given (not necessarily orthogonal) basis
    /// vectors; the projector is assembled by Gram-Schmidt.
    pub fn subspace_from_basis(basis: &[Vec<f64>]) -> Result<Self, SolverError> {
        let dim = basis.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(SolverError::InvalidParams(
                "subspace basis must contain nonzero-dimensional vectors".into(),
            ));
        }
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for b in basis {
            if b.len() != dim {
                return Err(SolverError::DimensionMismatch {
                    expected: dim,
                    got: b.len(),
                });
            }
            let mut q = b.clone();
            for u in &ortho {
                let c = geometry::dot(&q, u);
                for (qi, ui) in q.iter_mut().zip(u) {
                    *qi -= c * ui;
                }
            }
            let nrm = geometry::norm(&q);
            if nrm > 1e-12 {
                for qi in q.iter_mut() {
                    *qi /= nrm;
                }
                ortho.push(q);
            }
        }
        let mut projector = vec![0.0; dim * dim];
        for q in &ortho {
            for i in 0..dim {
                for j in 0..dim {
                    projector[i * dim + j] += q[i] * q[j];
                }
            }
        }
        Ok(ConvexSet::Subspace { projector, dim })
    }

    /// Subspace from an explicit projector matrix (row-major, `dim x dim`).
    pub fn subspace_from_projector(projector: Vec<f64>, dim: usize) -> Result<Self, SolverError> {
        if projector.len() != dim * dim {
            return Err(SolverError::DimensionMismatch {
                expected: dim * dim,
                got: projector.len(),
            });
        }
        Ok(ConvexSet::Subspace { projector, dim })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SolverError> {
        if lower.len() != upper.len() {
            return Err(SolverError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ConvexSet::Ball { center, radius }
    }

    /// The single point `{ c }`, as a radius-zero ball.
    pub fn point(c: Vec<f64>) -> Self {
        ConvexSet::Ball {
            center: c,
            radius: 0.0,
        }
    }

    pub fn consensus(probs: Vec<f64>, block_dim: usize) -> Result<Self, SolverError> {
        validate_probabilities(&probs)?;
        Ok(ConvexSet::Consensus { probs, block_dim })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Subspace { dim, .. } => *dim,
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Consensus { probs, block_dim } => probs.len() * block_dim,
            ConvexSet::Projector { dim, .. } => *dim,
        }
    }

    /// The inner product the projection is taken in.
    pub fn geometry(&self) -> Geometry {
        match self {
            ConvexSet::Consensus { probs, block_dim } => Geometry::block_weighted(probs, *block_dim),
            ConvexSet::Projector { geometry, .. } => geometry.clone(),
            _ => Geometry::Euclidean,
        }
    }

    /// Projects `x` onto the set in the set's declared inner product.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            ConvexSet::Subspace { projector, dim } => {
                let mut out = vec![0.0; *dim];
                for i in 0..*dim {
                    out[i] = geometry::dot(&projector[i * dim..(i + 1) * dim], x);
                }
                out
            }
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
                .collect(),
            ConvexSet::Ball { center, radius } => {
                let d = Geometry::Euclidean.dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else if *radius == 0.0 {
                    center.clone()
                } else {
                    let t = radius / d;
                    center
                        .iter()
                        .zip(x)
                        .map(|(c, v)| c + t * (v - c))
                        .collect()
                }
            }
            ConvexSet::Consensus { probs, block_dim } => {
                consensus_projection(x, probs, *block_dim)
            }
            ConvexSet::Projector { project, .. } => project(x),
        }
    }

    /// Squared distance `d^2(x) = ||x - P(x)||^2` in the set's geometry.
    pub fn distance_sq(&self, x: &[f64]) -> f64 {
        let p = self.project(x);
        self.geometry().dist_sq(x, &p)
    }
}

fn validate_probabilities(probs: &[f64]) -> Result<(), SolverError> {
    if probs.is_empty() || probs.iter().any(|&p| p <= 0.0) {
        return Err(SolverError::InvalidParams(
            "probabilities must be positive".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(SolverError::InvalidParams(format!(
            "probabilities must sum to 1, got {total}"
        )));
    }
    Ok(())
}

/// Projection of a block vector onto the consensus subspace
/// `{ x_1 = ... = x_N }` under the probability-weighted inner product: every
/// output block is the weighted mean `sum_i p_i x_i`.
pub fn project_consensus(x: &[f64], probs: &[f64]) -> Result<Vec<f64>, SolverError> {
    validate_probabilities(probs)?;
    if probs.is_empty() || x.len() % probs.len() != 0 {
        return Err(SolverError::DimensionMismatch {
            expected: probs.len(),
            got: x.len(),
        });
    }
    let block_dim = x.len() / probs.len();
    Ok(consensus_projection(x, probs, block_dim))
}

fn consensus_projection(x: &[f64], probs: &[f64], block_dim: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), probs.len() * block_dim);
    let mut mean = vec![0.0; block_dim];
    for (i, &p) in probs.iter().enumerate() {
        let block = &x[i * block_dim..(i + 1) * block_dim];
        for (m, &v) in mean.iter_mut().zip(block) {
            *m += p * v;
        }
    }
    let mut out = vec![0.0; x.len()];
    for chunk in out.chunks_mut(block_dim) {
        chunk.copy_from_slice(&mean);
    }
    out
}

/// Replicates one block across `n_blocks` (the canonical consensus-feasible
/// lift of a point).
pub fn replicate_block(block: &[f64], n_blocks: usize) -> Vec<f64> {
    let mut out = vec![0.0; block.len() * n_blocks];
    for chunk in out.chunks_mut(block.len()) {
        chunk.copy_from_slice(block);
    }
    out
}
