//! Apriori frequent-itemset mining with a per-pass support estimation hook.
//!
//! Each pass hands its candidates to a [`SupportEstimator`]; the exact
//! estimator counts the data, the others reconstruct original supports from
//! a perturbed database.

mod estimators;

pub use estimators::{
    CutPasteSupports, EstimatorFactory, ExactSupports, ExpectedGammaSupports, GammaSupports, MaskSupports, PassEstimate,
    SupportEstimator,
};

use crate::perturb::{Mechanism, PerturbError, PerturbedData};
use crate::reconstruct::ReconstructError;
use crate::schema::{Dataset, Schema};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("invalid minimum support {0}")]
    SupMin(f64),
    #[error("mechanism does not match the data: {0}")]
    Mismatch(String),
    #[error("subset {subset:?} has {cells} cells, above the cap of {cap}")]
    SubsetTooLarge { subset: Vec<usize>, cells: usize, cap: usize },
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// One `(attribute, category)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Item {
    pub attribute: usize,
    pub category: usize,
}

/// Items over distinct attributes, kept sorted by attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Itemset(Vec<Item>);

impl Itemset {
    pub fn new(mut items: Vec<Item>) -> Result<Self, MiningError> {
        items.sort();
        if items.windows(2).any(|w| w[0].attribute == w[1].attribute) {
            return Err(MiningError::Mismatch(format!("itemset repeats an attribute: {items:?}")));
        }
        Ok(Itemset(items))
    }

    pub fn items(&self) -> &[Item] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn attributes(&self) -> Vec<usize> {
        self.0.iter().map(|i| i.attribute).collect()
    }

    pub fn categories(&self) -> Vec<usize> {
        self.0.iter().map(|i| i.category).collect()
    }

    /// Whether a record carries every item.
    pub fn matches(&self, values: &[usize]) -> bool {
        self.0.iter().all(|i| values[i.attribute] == i.category)
    }

    /// `attribute=category` pairs joined by `;`.
    pub fn label(&self, schema: &Schema) -> String {
        self.0.iter().map(|i| schema.item_label(i.attribute, i.category)).collect::<Vec<_>>().join(";")
    }

    fn without(&self, skip: usize) -> Itemset {
        Itemset(self.0.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, x)| *x).collect())
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| format!("{}:{}", i.attribute, i.category)).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemset {
    pub itemset: Itemset,
    pub support: f64,
}

/// What the miner saw in one pass, kept for reporting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassDiagnostics {
    pub candidates: usize,
    pub negative_estimates: usize,
    pub min_estimate: Option<f64>,
    pub max_estimate: Option<f64>,
    pub condition_number: Option<f64>,
    /// The reconstruction system had no unique solution; no itemset survives.
    pub singular: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub length: usize,
    pub itemsets: Vec<FrequentItemset>,
    pub diagnostics: PassDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningResult {
    pub sup_min: f64,
    pub mechanism: String,
    pub levels: Vec<Level>,
}

impl MiningResult {
    pub fn level(&self, length: usize) -> Option<&Level> {
        self.levels.iter().find(|l| l.length == length)
    }

    pub fn itemsets(&self, length: usize) -> &[FrequentItemset] {
        self.level(length).map(|l| l.itemsets.as_slice()).unwrap_or(&[])
    }

    /// Frequent-itemset count for lengths `1..=max_length`.
    pub fn counts(&self, max_length: usize) -> Vec<usize> {
        (1..=max_length).map(|k| self.itemsets(k).len()).collect()
    }

    pub fn max_length(&self) -> usize {
        self.levels.iter().filter(|l| !l.itemsets.is_empty()).map(|l| l.length).max().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.levels.iter().map(|l| l.itemsets.len()).sum()
    }

    pub fn support(&self, itemset: &Itemset) -> Option<f64> {
        self.itemsets(itemset.len()).iter().find(|f| &f.itemset == itemset).map(|f| f.support)
    }

    /// Every frequent itemset has all its sub-itemsets one shorter in the result.
    pub fn is_downward_closed(&self) -> bool {
        self.levels.iter().filter(|l| l.length > 1).all(|l| {
            let below: HashSet<&Itemset> = self.itemsets(l.length - 1).iter().map(|f| &f.itemset).collect();
            l.itemsets.iter().all(|f| (0..f.itemset.len()).all(|i| below.contains(&f.itemset.without(i))))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningOptions {
    /// Largest attribute-subset marginal the gamma-diagonal reconstruction may build.
    pub max_subset_cells: usize,
    pub max_length: Option<usize>,
}

impl Default for MiningOptions {
    fn default() -> Self {
        MiningOptions { max_subset_cells: 1 << 22, max_length: None }
    }
}

fn first_candidates(schema: &Schema) -> Vec<Itemset> {
    (0..schema.len())
        .flat_map(|a| (0..schema.attribute(a).cardinality()).map(move |c| Itemset(vec![Item { attribute: a, category: c }])))
        .collect()
}

/// Joins frequent `k`-itemsets sharing their first `k - 1` items and drops
/// any candidate with an infrequent `k`-subset.
pub fn generate_candidates(frequent: &[Itemset]) -> Vec<Itemset> {
    let mut sorted: Vec<&Itemset> = frequent.iter().collect();
    sorted.sort();
    let known: HashSet<&Itemset> = sorted.iter().copied().collect();
    let mut out = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        let k = a.len();
        for b in &sorted[i + 1..] {
            if a.0[..k - 1] != b.0[..k - 1] {
                break;
            }
            let (x, y) = (a.0[k - 1], b.0[k - 1]);
            if x.attribute == y.attribute {
                continue;
            }
            let mut items = a.0.clone();
            items.push(y);
            let cand = Itemset(items);
            if (0..cand.len()).all(|skip| known.contains(&cand.without(skip))) {
                out.push(cand);
            }
        }
    }
    out
}

/// Level-wise Apriori. Candidates whose estimated support reaches `sup_min`
/// (inclusive) are frequent.
pub fn apriori<E: SupportEstimator + ?Sized>(
    schema: &Schema,
    estimator: &E,
    sup_min: f64,
    options: &MiningOptions,
) -> Result<MiningResult, MiningError> {
    if !(sup_min > 0.0) || !sup_min.is_finite() {
        return Err(MiningError::SupMin(sup_min));
    }
    let max_length = options.max_length.unwrap_or(schema.len()).min(schema.len());
    let mut levels = Vec::new();
    let mut candidates = first_candidates(schema);
    let mut length = 1;
    while !candidates.is_empty() && length <= max_length {
        let estimate = estimator.estimate(&candidates, length, options)?;
        let mut diagnostics = PassDiagnostics {
            candidates: candidates.len(),
            condition_number: estimate.condition_number,
            singular: estimate.singular,
            ..Default::default()
        };
        let mut itemsets = Vec::new();
        if !estimate.singular {
            for (itemset, &support) in candidates.iter().zip(&estimate.supports) {
                if support < 0.0 {
                    diagnostics.negative_estimates += 1;
                }
                diagnostics.min_estimate = Some(diagnostics.min_estimate.map_or(support, |m: f64| m.min(support)));
                diagnostics.max_estimate = Some(diagnostics.max_estimate.map_or(support, |m: f64| m.max(support)));
                if support >= sup_min {
                    itemsets.push(FrequentItemset { itemset: itemset.clone(), support });
                }
            }
        }
        let frequent: Vec<Itemset> = itemsets.iter().map(|f| f.itemset.clone()).collect();
        levels.push(Level { length, itemsets, diagnostics });
        candidates = if length < max_length { generate_candidates(&frequent) } else { Vec::new() };
        length += 1;
    }
    Ok(MiningResult { sup_min, mechanism: estimator.name(), levels })
}

/// Mines the original data directly; the ground truth for accuracy metrics.
pub fn apriori_plain(dataset: &Dataset, sup_min: f64) -> Result<MiningResult, MiningError> {
    apriori(dataset.schema(), &ExactSupports::new(dataset), sup_min, &MiningOptions::default())
}

/// Mines a perturbed database, reconstructing supports after every pass.
pub fn apriori_reconstructed(
    perturbed: &PerturbedData,
    schema: &Schema,
    mechanism: &Mechanism,
    sup_min: f64,
    options: &MiningOptions,
) -> Result<MiningResult, MiningError> {
    let estimator = EstimatorFactory::for_perturbed(perturbed, schema, mechanism)?;
    apriori(schema, estimator.as_ref(), sup_min, options)
}
