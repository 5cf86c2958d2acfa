//! Numerical kernels shared by the pipeline: histogram distances, the
//! minimax boundary-path distance, and k-means for visual-word dictionaries.
//!
//! All kernels are pure functions on immutable inputs; callers are free to
//! evaluate pairs in parallel.

mod emd;
mod kmeans;
mod minimax;

pub use emd::{emd_1d, emd_general, GroundDistance};
pub use kmeans::{kmeans, Dictionary, KmeansResult};
pub use minimax::{minimax_all_pairs, minimax_all_pairs_mst, BoundaryGraph};

use std::collections::BTreeSet;

use thiserror::Error;

/// Tolerance for "sums to 1" checks on normalized histograms.
pub(crate) const MASS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("histogram length mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("histogram is not normalized: total mass {mass}")]
    Unnormalized { mass: f64 },
    #[error("negative histogram mass {mass} at bin {bin}")]
    NegativeMass { bin: usize, mass: f64 },
    #[error("ground distance matrix must be square ({n}x{n}), symmetric, non-negative, with zero diagonal")]
    InvalidGroundDistance { n: usize },
    #[error("rbf scale must be positive, got {gamma}")]
    InvalidGamma { gamma: f64 },
    #[error("k-means needs at least {k} points, got {n}")]
    TooFewPoints { k: usize, n: usize },
    #[error("k-means cluster count must be at least 1")]
    ZeroK,
    #[error("point {index} has dimension {got}, expected {expected}")]
    PointDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("boundary edge weight {weight} outside [0,1]")]
    EdgeWeightOutOfRange { weight: f64 },
    #[error("edge endpoint {vertex} outside graph of {n} vertices")]
    EdgeOutOfRange { vertex: usize, n: usize },
    #[error("non-finite value in input")]
    NonFinite,
}

pub(crate) fn check_normalized(h: &[f64]) -> Result<(), KernelError> {
    let mut mass = 0.0;
    for (bin, &v) in h.iter().enumerate() {
        if !v.is_finite() {
            return Err(KernelError::NonFinite);
        }
        if v < 0.0 {
            return Err(KernelError::NegativeMass { bin, mass: v });
        }
        mass += v;
    }
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(KernelError::Unnormalized { mass });
    }
    Ok(())
}

/// Chi-squared distance between two normalized histograms,
/// `0.5 * sum (a-b)^2 / (a+b)` with zero-denominator terms dropped.
/// Disjoint supports score exactly 1.
pub fn chi2(h1: &[f64], h2: &[f64]) -> Result<f64, KernelError> {
    if h1.len() != h2.len() {
        return Err(KernelError::DimensionMismatch {
            left: h1.len(),
            right: h2.len(),
        });
    }
    let mut acc = 0.0;
    for (&a, &b) in h1.iter().zip(h2) {
        let denom = a + b;
        if denom > 0.0 {
            let diff = a - b;
            acc += diff * diff / denom;
        }
    }
    Ok(0.5 * acc)
}

/// Exponential radial basis affinity `exp(-d / gamma)`.
pub fn rbf(d: f64, gamma: f64) -> Result<f64, KernelError> {
    if !(gamma > 0.0) {
        return Err(KernelError::InvalidGamma { gamma });
    }
    Ok((-d / gamma).exp())
}

/// Jaccard overlap `|A ∩ B| / |A ∪ B|`; 0 when both sets are empty.
pub fn jaccard(a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
