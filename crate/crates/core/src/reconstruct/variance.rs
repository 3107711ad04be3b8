use super::ReconstructError;
use crate::perturb::{ConditionNumber, GammaDiagonal, MaterializedMatrix, RandomizedGamma};
use crate::schema::Dataset;
use serde::{Deserialize, Serialize};

/// Per-value spread of perturbed counts and the error bound it implies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceDiagnostic {
    pub variances: Vec<f64>,
    /// `cond * sqrt(sum Var(Y_v)) / ||A X||`: the reconstruction error bound
    /// evaluated at a one-standard-deviation observation error.
    pub relative_bound: f64,
    pub condition_number: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl VarianceDiagnostic {
    fn new(variances: Vec<f64>, expected: &[f64], condition_number: f64) -> Self {
        let spread = variances.iter().sum::<f64>().sqrt();
        VarianceDiagnostic { relative_bound: condition_number * spread / norm(expected), variances, condition_number }
    }
}

/// Poisson-binomial variance of every perturbed count,
/// `A_v X (1 - A_v X / N) - sum_u (A_vu - A_v X / N)^2 X_u`.
pub fn variance_diagnostic(x: &[f64], matrix: &MaterializedMatrix) -> Result<VarianceDiagnostic, ReconstructError> {
    if x.len() != matrix.cols() {
        return Err(ReconstructError::Dimension { expected: matrix.cols(), got: x.len() });
    }
    let n: f64 = x.iter().sum();
    let expected = matrix.apply(x)?;
    let variances = (0..matrix.rows())
        .map(|v| {
            let mean = expected[v] / n;
            let spread: f64 = x.iter().enumerate().map(|(u, xu)| (matrix.get(v, u) - mean).powi(2) * xu).sum();
            (expected[v] * (1.0 - mean) - spread).max(0.0)
        })
        .collect();
    Ok(VarianceDiagnostic::new(variances, &expected, matrix.condition_number()))
}

/// The same variance for a gamma-diagonal matrix in `O(n)`:
/// `X_v d (1 - d) + (N - X_v) o (1 - o)`.
pub fn variance_gamma(x: &[f64], spec: &GammaDiagonal) -> Result<VarianceDiagnostic, ReconstructError> {
    if x.len() != spec.domain_size() {
        return Err(ReconstructError::Dimension { expected: spec.domain_size(), got: x.len() });
    }
    let n: f64 = x.iter().sum();
    let (d, o) = (spec.diagonal(), spec.off_diagonal());
    let variances = x.iter().map(|xv| xv * d * (1.0 - d) + (n - xv) * o * (1.0 - o)).collect();
    let expected: Vec<f64> = x.iter().map(|xv| (d - o) * xv + o * n).collect();
    Ok(VarianceDiagnostic::new(variances, &expected, spec.condition_number()))
}

/// Splits the observation error of a randomized-matrix run into the chance
/// fluctuation around the clients' own matrices and the offset of their
/// average from the expected matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedDecomposition {
    /// `E(Y | draws)_v = sum_i p_v^i`
    pub conditional_expectation: Vec<f64>,
    /// `A X`
    pub expected: Vec<f64>,
    /// `||Y - E(Y | draws)||`
    pub fluctuation: f64,
    /// `||(mean realized matrix - A) X||`
    pub matrix_offset: f64,
    /// `||Y - A X||`
    pub total: f64,
    /// `sum_i p_v^i (1 - p_v^i)`, the variance of `Y_v` given the draws.
    pub conditional_variance: Vec<f64>,
}

/// Evaluates the decomposition for one realized run; `seed` must be the one
/// the clients drew their parameters with.
pub fn randomized_decomposition(
    original: &Dataset,
    perturbed_counts: &[f64],
    spec: &RandomizedGamma,
    seed: u64,
) -> Result<RandomizedDecomposition, ReconstructError> {
    let n = spec.base().domain_size();
    if perturbed_counts.len() != n || original.schema().domain_size() != n {
        return Err(ReconstructError::Dimension { expected: n, got: perturbed_counts.len() });
    }
    let mut off_mass = 0.0;
    let mut off_var = 0.0;
    let mut diag_excess = vec![0.0; n];
    let mut var_excess = vec![0.0; n];
    let mut x = vec![0.0; n];
    for (i, r) in original.records().iter().enumerate() {
        let p = spec.client_params(seed, i as u64);
        let u = original.schema().encode(r);
        off_mass += p.off;
        off_var += p.off * (1.0 - p.off);
        diag_excess[u] += p.diag - p.off;
        var_excess[u] += p.diag * (1.0 - p.diag) - p.off * (1.0 - p.off);
        x[u] += 1.0;
    }
    let conditional_expectation: Vec<f64> = diag_excess.iter().map(|e| off_mass + e).collect();
    let conditional_variance = var_excess.iter().map(|e| off_var + e).collect();
    let g = spec.base();
    let total_n = original.len() as f64;
    let expected: Vec<f64> = x.iter().map(|xv| (g.diagonal() - g.off_diagonal()) * xv + g.off_diagonal() * total_n).collect();
    let diff = |a: &[f64], b: &[f64]| norm(&a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok(RandomizedDecomposition {
        fluctuation: diff(perturbed_counts, &conditional_expectation),
        matrix_offset: diff(&conditional_expectation, &expected),
        total: diff(perturbed_counts, &expected),
        conditional_expectation,
        expected,
        conditional_variance,
    })
}
