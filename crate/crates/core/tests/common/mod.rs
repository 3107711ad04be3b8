//! Oracles shared by the acceptance harness and the integration tests.
#![allow(dead_code)]

use frapp::experiment::{load_source, DatasetSource};
use frapp::{Dataset, Schema};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// CENSUS over `adult.data` and `adult.test`.
pub fn census() -> (Arc<Schema>, Dataset) {
    let d = data_dir();
    let source = DatasetSource::Csv {
        paths: vec![d.join("adult/adult.data"), d.join("adult/adult.test")],
        header: false,
        columns: None,
        abort_on_missing: false,
        clamp: false,
    };
    load_source(&d.join("schemas/census.toml"), &source, 0).expect("census loads")
}

/// Lower bound on the condition number of any symmetric stochastic matrix of
/// size `n` whose rows have entry ratio at most `gamma`.
pub fn optimal_condition(gamma: f64, n: usize) -> f64 {
    (gamma + n as f64 - 1.0) / (gamma - 1.0)
}

/// `max|l| / min|l|` over the eigenvalues of a symmetric matrix.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let hi = eig.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let lo = eig.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
    hi / lo
}

/// A random symmetric permutation matrix (an involution).
fn involution<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut p: Vec<usize> = (0..n).collect();
    let pairs = rng.gen_range(0..=n / 2);
    for k in 0..pairs {
        let (a, b) = (order[2 * k], order[2 * k + 1]);
        p[a] = b;
        p[b] = a;
    }
    p
}

/// `x (J + (g - 1) P)` for an involution `P`; symmetric, stochastic, ratio `g`.
pub fn permuted_gamma_diagonal(n: usize, g: f64, p: &[usize]) -> DMatrix<f64> {
    let x = 1.0 / (g + n as f64 - 1.0);
    DMatrix::from_fn(n, n, |i, j| if p[j] == i { g * x } else { x })
}

pub fn max_row_ratio(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().fold(0.0f64, |a, &v| a.max(v)) / r.iter().fold(f64::INFINITY, |a, &v| a.min(v)))
        .fold(0.0, f64::max)
}

pub fn is_admissible(m: &DMatrix<f64>, gamma: f64) -> bool {
    let n = m.nrows();
    m.iter().all(|&v| v > 0.0)
        && max_row_ratio(m) <= gamma * (1.0 + 1e-12)
        && (0..n).all(|j| (m.column(j).sum() - 1.0).abs() < 1e-12)
        && (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// A random symmetric column-stochastic matrix with row ratio at most `gamma`:
/// a convex mixture of permuted gamma-diagonal matrices (ratios in `[1, gamma]`)
/// followed by random symmetric zero-row-sum moves that keep it admissible.
pub fn random_admissible<R: Rng>(rng: &mut R, n: usize, gamma: f64) -> DMatrix<f64> {
    let parts = rng.gen_range(1..=3);
    let weights: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut m = DMatrix::zeros(n, n);
    for w in weights {
        let g = if rng.gen_bool(0.5) { gamma } else { rng.gen_range(1.0..=gamma) };
        m += permuted_gamma_diagonal(n, g, &involution(rng, n)) * (w / total);
    }
    if n >= 2 {
        for _ in 0..rng.gen_range(0..4 * n) {
            let mut candidate = m.clone();
            let eps = rng.gen_range(-1.0..1.0) * candidate.min() * 0.5;
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(1..n)) % n;
            if n >= 4 && rng.gen_bool(0.5) {
                // +eps at (i,k),(j,l), -eps at (i,l),(j,k), mirrored
                let mut rest: Vec<usize> = (0..n).filter(|&t| t != i && t != j).collect();
                rest.shuffle(rng);
                let (k, l) = (rest[0], rest[1]);
                for (a, b, s) in [(i, k, 1.0), (j, l, 1.0), (i, l, -1.0), (j, k, -1.0)] {
                    candidate[(a, b)] += s * eps;
                    candidate[(b, a)] += s * eps;
                }
            } else {
                candidate[(i, j)] += eps;
                candidate[(j, i)] += eps;
                candidate[(i, i)] -= eps;
                candidate[(j, j)] -= eps;
            }
            if is_admissible(&candidate, gamma) {
                m = candidate;
            }
        }
    }
    m
}

/// Every cardinality tuple (each at least 2) whose product is at most `limit`.
pub fn small_schemas(limit: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, product: usize, limit: usize, out: &mut Vec<Vec<usize>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        for c in 2..=limit / product {
            prefix.push(c);
            rec(prefix, product * c, limit, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), 1, limit, &mut out);
    out
}

/// Relative support of `itemset` among the records.
pub fn true_support(dataset: &Dataset, itemset: &frapp::mining::Itemset) -> f64 {
    dataset.records().iter().filter(|r| itemset.matches(r.values())).count() as f64 / dataset.len() as f64
}

/// Frequent-itemset counts per length by counting every attribute subset's
/// value combinations directly.
pub fn brute_force_counts(dataset: &Dataset, sup_min: f64) -> Vec<usize> {
    let m = dataset.schema().len();
    let threshold = sup_min * dataset.len() as f64;
    let mut counts = vec![0usize; m];
    for mask in 1u32..(1 << m) {
        let attrs: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let mut table: HashMap<Vec<usize>, usize> = HashMap::new();
        for r in dataset.records() {
            *table.entry(attrs.iter().map(|&j| r.values()[j]).collect()).or_default() += 1;
        }
        counts[attrs.len() - 1] += table.values().filter(|&&c| c as f64 >= threshold).count();
    }
    counts
}
