//! Estimating original value distributions from perturbed counts.
//!
//! Gamma-diagonal matrices have closed-form inverses, both on the full domain
//! and on the marginal of any attribute subset, so no linear system is ever
//! formed for them. Other mechanisms go through a pivoted dense solve.

mod subset;
mod variance;

pub use subset::{count_marginal, count_marginals, marginalize, SubsetIndexer, SubsetMarginal};
pub use variance::{randomized_decomposition, variance_diagnostic, variance_gamma, RandomizedDecomposition, VarianceDiagnostic};

use crate::perturb::{GammaDiagonal, MaterializedMatrix, PerturbError};
use crate::schema::Dataset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReconstructError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("supports sum to {total}, expected 1")]
    Mass { total: f64 },
    #[error("invalid attribute subset: {0}")]
    Subset(String),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// Counts (or relative supports) over a full domain or an attribute subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    counts: Vec<f64>,
    total: f64,
    /// Attribute subset the cells range over; `None` for the full domain.
    subset: Option<Vec<usize>>,
}

impl FrequencyVector {
    pub fn new(counts: Vec<f64>, subset: Option<Vec<usize>>) -> Self {
        let total = counts.iter().sum();
        FrequencyVector { counts, total, subset }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<f64> {
        self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn subset(&self) -> Option<&[usize]> {
        self.subset.as_deref()
    }

    /// Counts divided by `n`; the total is carried over as `total / n`.
    pub fn scaled(&self, n: f64) -> FrequencyVector {
        FrequencyVector {
            counts: self.counts.iter().map(|c| c / n).collect(),
            total: self.total / n,
            subset: self.subset.clone(),
        }
    }

    pub fn negative_entries(&self) -> usize {
        self.counts.iter().filter(|&&c| c < 0.0).count()
    }
}

/// Histogram of encoded records over the full domain.
pub fn count_full(dataset: &Dataset) -> FrequencyVector {
    let mut counts = vec![0.0; dataset.schema().domain_size()];
    for r in dataset.records() {
        counts[dataset.schema().encode(r)] += 1.0;
    }
    FrequencyVector::new(counts, None)
}

/// `X_u = (Y_u - x N) / ((gamma - 1) x)`, the inverse of the gamma-diagonal
/// matrix applied to `Y`, with `N` taken as `sum(Y)`.
pub fn reconstruct_full(y: &FrequencyVector, spec: &GammaDiagonal) -> Result<FrequencyVector, ReconstructError> {
    if y.len() != spec.domain_size() {
        return Err(ReconstructError::Dimension { expected: spec.domain_size(), got: y.len() });
    }
    let x = spec.x();
    let shift = x * y.total();
    let scale = (spec.gamma() - 1.0) * x;
    let counts = y.counts().iter().map(|v| (v - shift) / scale).collect();
    Ok(FrequencyVector::new(counts, y.subset.clone()))
}

/// `X = A^-1 Y` through a pivoted LU factorization.
pub fn reconstruct_dense(y: &FrequencyVector, matrix: &MaterializedMatrix) -> Result<FrequencyVector, ReconstructError> {
    if matrix.rows() != matrix.cols() || y.len() != matrix.rows() {
        return Err(ReconstructError::Dimension { expected: matrix.rows(), got: y.len() });
    }
    Ok(FrequencyVector::new(matrix.solve(y.counts())?, y.subset.clone()))
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `||estimate - truth|| / ||truth||` in the Euclidean norm.
pub fn relative_error(estimate: &[f64], truth: &[f64]) -> f64 {
    l2(estimate.iter().zip(truth).map(|(a, b)| a - b)) / l2(truth.iter().copied())
}

/// Right-hand side of the perturbation bound on reconstruction error,
/// `cond * ||Y - E(Y)|| / ||E(Y)||`.
pub fn error_bound(condition_number: f64, observed: &[f64], expected: &[f64]) -> f64 {
    condition_number * relative_error(observed, expected)
}
