//! Accuracy of a mined result against the ground truth.
//!
//! Support error `rho` averages `|est - true| / true` over itemsets that are
//! frequent in both results, normalized by that intersection; the variant
//! normalized by `|F|` is reported alongside. Identity errors count false
//! positives and negatives as percentages of `|F|`. Lengths with an empty
//! truth set have undefined metrics (`None`), never zero.
//!
//! Overall figures pool the raw sums across lengths, which makes `sigma+`,
//! `sigma-` and the `|F|`-normalized `rho` the `|F|`-weighted means of their
//! per-length values, and `rho` the `|F & R|`-weighted mean of its own.
//! The one exception is false positives at a length whose truth set is empty:
//! they have no per-length `sigma+`, but the pooled overall still counts them.

use crate::mining::{Itemset, MiningResult};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("results were mined at different minimum supports ({0} vs {1})")]
    SupMin(f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthAccuracy {
    pub length: usize,
    /// `|F|`
    pub truth: usize,
    /// `|R|`
    pub found: usize,
    /// `|F & R|`
    pub correct: usize,
    pub support_error_pct: Option<f64>,
    pub support_error_over_truth_pct: Option<f64>,
    pub false_positive_pct: Option<f64>,
    pub false_negative_pct: Option<f64>,
    /// `sum |est - true| / true` over `F & R`, as a percentage.
    relative_error_sum: f64,
}

impl LengthAccuracy {
    fn finish(mut self) -> Self {
        let pct = |num: f64, den: usize| if den == 0 { None } else { Some(num / den as f64) };
        self.support_error_pct = pct(self.relative_error_sum, self.correct);
        self.support_error_over_truth_pct = pct(self.relative_error_sum, self.truth);
        self.false_positive_pct = pct(100.0 * (self.found - self.correct) as f64, self.truth);
        self.false_negative_pct = pct(100.0 * (self.truth - self.correct) as f64, self.truth);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mechanism: String,
    pub sup_min: f64,
    pub lengths: Vec<LengthAccuracy>,
    pub overall: LengthAccuracy,
}

impl AccuracyReport {
    pub fn length(&self, k: usize) -> Option<&LengthAccuracy> {
        self.lengths.iter().find(|l| l.length == k)
    }

    /// `(length, metric, value)` rows; undefined metrics are skipped. Length 0 is the overall row.
    pub fn rows(&self) -> Vec<(usize, &'static str, f64)> {
        let mut out = Vec::new();
        for l in self.lengths.iter().chain(std::iter::once(&self.overall)) {
            out.push((l.length, "F", l.truth as f64));
            out.push((l.length, "R", l.found as f64));
            for (name, v) in [
                ("rho", l.support_error_pct),
                ("rho_F", l.support_error_over_truth_pct),
                ("sigma_plus", l.false_positive_pct),
                ("sigma_minus", l.false_negative_pct),
            ] {
                if let Some(v) = v {
                    out.push((l.length, name, v));
                }
            }
        }
        out
    }
}

fn supports_by_length(result: &MiningResult) -> HashMap<usize, HashMap<&Itemset, f64>> {
    result.levels.iter().map(|l| (l.length, l.itemsets.iter().map(|f| (&f.itemset, f.support)).collect())).collect()
}

/// Compares `found` against `truth` length by length.
pub fn evaluate(found: &MiningResult, truth: &MiningResult) -> Result<AccuracyReport, MetricsError> {
    if found.sup_min != truth.sup_min {
        return Err(MetricsError::SupMin(found.sup_min, truth.sup_min));
    }
    let f = supports_by_length(truth);
    let r = supports_by_length(found);
    let max_len = found.max_length().max(truth.max_length());
    let empty = HashMap::new();
    let mut overall = LengthAccuracy::default();
    let mut lengths = Vec::with_capacity(max_len);
    for k in 1..=max_len {
        let fk = f.get(&k).unwrap_or(&empty);
        let rk = r.get(&k).unwrap_or(&empty);
        let mut acc = LengthAccuracy { length: k, truth: fk.len(), found: rk.len(), ..Default::default() };
        // sorted for a summation order independent of hashing
        let mut errs: Vec<f64> = fk
            .iter()
            .filter_map(|(set, &t)| rk.get(set).map(|&e| 100.0 * (e - t).abs() / t))
            .collect();
        errs.sort_by(f64::total_cmp);
        acc.correct = errs.len();
        acc.relative_error_sum = errs.iter().sum();
        overall.truth += acc.truth;
        overall.found += acc.found;
        overall.correct += acc.correct;
        overall.relative_error_sum += acc.relative_error_sum;
        lengths.push(acc.finish());
    }
    Ok(AccuracyReport { mechanism: found.mechanism.clone(), sup_min: found.sup_min, lengths, overall: overall.finish() })
}

/// `rho` per length (index `k - 1`) and overall.
pub fn support_error(found: &MiningResult, truth: &MiningResult) -> Result<(Vec<Option<f64>>, Option<f64>), MetricsError> {
    let report = evaluate(found, truth)?;
    Ok((report.lengths.iter().map(|l| l.support_error_pct).collect(), report.overall.support_error_pct))
}

/// `(sigma+, sigma-)` per length (index `k - 1`) and overall.
#[allow(clippy::type_complexity)]
pub fn identity_errors(
    found: &MiningResult,
    truth: &MiningResult,
) -> Result<(Vec<Option<(f64, f64)>>, Option<(f64, f64)>), MetricsError> {
    let report = evaluate(found, truth)?;
    let pair = |l: &LengthAccuracy| l.false_positive_pct.zip(l.false_negative_pct);
    Ok((report.lengths.iter().map(pair).collect(), pair(&report.overall)))
}
