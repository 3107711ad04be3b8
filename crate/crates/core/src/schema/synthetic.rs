use super::{Dataset, Record, Schema, SchemaError};
use crate::rng::{self, Purpose};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Distribution for synthetic record generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform,
    /// Independent attributes with unnormalized category weights.
    Independent { weights: Vec<Vec<f64>> },
    /// Unnormalized weights over the full encoded domain.
    Joint { weights: Vec<f64> },
    PointMass { record: Vec<usize> },
}

enum Sampler {
    Uniform(Vec<usize>),
    Independent(Vec<WeightedIndex<f64>>),
    Joint(WeightedIndex<f64>),
    Point(Record),
}

fn weighted(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>, SchemaError> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(SchemaError::Distribution(format!("{what}: weights must be finite and non-negative")));
    }
    WeightedIndex::new(weights).map_err(|_| SchemaError::Distribution(format!("{what}: weights have no positive mass")))
}

impl Sampler {
    fn new(schema: &Schema, spec: &DistributionSpec) -> Result<Self, SchemaError> {
        Ok(match spec {
            DistributionSpec::Uniform => Sampler::Uniform(schema.cardinalities()),
            DistributionSpec::Independent { weights } => {
                if weights.len() != schema.len() {
                    return Err(SchemaError::Distribution(format!(
                        "{} weight vectors for {} attributes",
                        weights.len(),
                        schema.len()
                    )));
                }
                let per = weights
                    .iter()
                    .zip(schema.attributes())
                    .map(|(w, a)| {
                        if w.len() != a.cardinality() {
                            return Err(SchemaError::Distribution(format!(
                                "attribute `{}`: {} weights for {} categories",
                                a.name(),
                                w.len(),
                                a.cardinality()
                            )));
                        }
                        weighted(w, a.name())
                    })
                    .collect::<Result<_, _>>()?;
                Sampler::Independent(per)
            }
            DistributionSpec::Joint { weights } => {
                if weights.len() != schema.domain_size() {
                    return Err(SchemaError::Distribution(format!(
                        "{} joint weights for domain of size {}",
                        weights.len(),
                        schema.domain_size()
                    )));
                }
                Sampler::Joint(weighted(weights, "joint")?)
            }
            DistributionSpec::PointMass { record } => {
                let r = Record::new(record.clone());
                schema.validate(&r)?;
                Sampler::Point(r)
            }
        })
    }

    fn draw<R: Rng>(&self, schema: &Schema, rng: &mut R) -> Record {
        match self {
            Sampler::Uniform(cards) => Record::new(cards.iter().map(|&c| rng.gen_range(0..c)).collect()),
            Sampler::Independent(per) => Record::new(per.iter().map(|w| w.sample(rng)).collect()),
            Sampler::Joint(w) => schema.decode(w.sample(rng)).expect("index within domain"),
            Sampler::Point(r) => r.clone(),
        }
    }
}

/// Draws `n` i.i.d. records; record `i` uses its own stream, so the output
/// depends only on `(schema, n, spec, seed)`.
pub fn generate_synthetic(
    schema: Arc<Schema>,
    n: usize,
    spec: &DistributionSpec,
    seed: u64,
) -> Result<Dataset, SchemaError> {
    let sampler = Sampler::new(&schema, spec)?;
    let records: Vec<Record> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, Purpose::Synthetic, i as u64);
            sampler.draw(&schema, &mut rng)
        })
        .collect();
    Dataset::new(schema, records, format!("synthetic(n={n}, seed={seed})"))
}
