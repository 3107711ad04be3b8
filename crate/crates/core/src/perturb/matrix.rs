use super::PerturbError;
use crate::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Dense perturbation matrix; entry `(v, u)` is `P(u -> v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterializedMatrix {
    entries: DMatrix<f64>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
}

impl MaterializedMatrix {
    pub fn new(entries: DMatrix<f64>) -> Self {
        MaterializedMatrix { entries, row_labels: None, col_labels: None }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        MaterializedMatrix::new(DMatrix::from_fn(rows, cols, f))
    }

    pub fn identity(n: usize) -> Self {
        MaterializedMatrix::new(DMatrix::identity(n, n))
    }

    pub fn with_labels(mut self, rows: Vec<String>, cols: Vec<String>) -> Self {
        self.row_labels = Some(rows);
        self.col_labels = Some(cols);
        self
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, v: usize, u: usize) -> f64 {
        self.entries[(v, u)]
    }

    pub fn column(&self, u: usize) -> Vec<f64> {
        self.entries.column(u).iter().copied().collect()
    }

    /// Largest `|sum_v A[v][u] - 1|` over columns.
    pub fn max_column_deviation(&self) -> f64 {
        self.entries.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks non-negativity and column sums within `tol`.
    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.min_entry() >= 0.0 && self.max_column_deviation() <= tol
    }

    /// `max_v max_{u1,u2} A[v][u1] / A[v][u2]`: the amplification the matrix grants.
    pub fn max_row_ratio(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|row| {
                let hi = row.iter().copied().fold(0.0, f64::max);
                let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
                if hi == 0.0 {
                    1.0
                } else {
                    hi / lo
                }
            })
            .fold(1.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.rows();
        n == self.cols() && (0..n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// `A y` for a column vector `y`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, PerturbError> {
        if x.len() != self.cols() {
            return Err(PerturbError::Dimension { expected: self.cols(), got: x.len() });
        }
        Ok((&self.entries * DVector::from_column_slice(x)).iter().copied().collect())
    }

    /// Solves `A x = y` by LU with partial pivoting.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>, PerturbError> {
        if self.rows() != self.cols() {
            return Err(PerturbError::Dimension { expected: self.rows(), got: self.cols() });
        }
        if y.len() != self.rows() {
            return Err(PerturbError::Dimension { expected: self.rows(), got: y.len() });
        }
        let lu = self.entries.clone().lu();
        let x = lu.solve(&DVector::from_column_slice(y)).ok_or(PerturbError::Singular)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PerturbError::Singular);
        }
        Ok(x.iter().copied().collect())
    }
}

/// 2-norm condition number of a square matrix.
///
/// Symmetric input uses the eigenvalues (`max|l| / min|l|`, which is
/// `l_max / l_min` for positive-definite matrices); anything else uses the
/// extreme singular values. Singular matrices give `f64::INFINITY`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "condition number of a non-square matrix");
    let n = m.nrows();
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let symmetric = (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale.max(1.0)));
    let magnitudes: Vec<f64> = if symmetric {
        m.clone().symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).collect()
    } else {
        m.clone().svd(false, false).singular_values.iter().copied().collect()
    };
    let hi = magnitudes.iter().copied().fold(0.0, f64::max);
    let lo = magnitudes.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == 0.0 || lo <= hi * f64::EPSILON * n as f64 {
        return f64::INFINITY;
    }
    hi / lo
}

/// Anything whose 2-norm condition number can be reported.
pub trait ConditionNumber {
    fn condition_number(&self) -> f64;
}

impl ConditionNumber for MaterializedMatrix {
    fn condition_number(&self) -> f64 {
        condition_number(&self.entries)
    }
}

/// Inverse-CDF walk over column `u`: returns the first `v` with
/// `F(v-1) < r <= F(v)`, `r` in `(0, 1]`.
pub fn sample_column(matrix: &MaterializedMatrix, u: usize, r: f64) -> usize {
    let col = matrix.entries.column(u);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (v, &p) in col.iter().enumerate() {
        if p > 0.0 {
            last_positive = v;
        }
        acc += p;
        if r <= acc && p > 0.0 {
            return v;
        }
    }
    last_positive
}

/// Generic perturbation of one encoded value through a materialized matrix.
pub fn perturb_generic<R: Rng + ?Sized>(index: usize, matrix: &MaterializedMatrix, rng: &mut R) -> usize {
    sample_column(matrix, index, rng::open_closed_unit(rng))
}
