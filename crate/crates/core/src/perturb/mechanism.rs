use super::boolean::{mask_expand, BooleanDataset};
use super::cut_paste::CutPasteSpec;
use super::gamma::{ChainSampler, GammaDiagonal, RandomizedGamma};
use super::mask::{mask_perturb, MaskSpec};
use super::PerturbError;
use crate::rng::{self, Purpose};
use crate::schema::{Dataset, Record, Schema};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MechanismKind {
    #[serde(rename = "DET-GD")]
    DetGd,
    #[serde(rename = "RAN-GD")]
    RanGd,
    #[serde(rename = "MASK")]
    Mask,
    #[serde(rename = "C&P")]
    CutPaste,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [MechanismKind::DetGd, MechanismKind::RanGd, MechanismKind::Mask, MechanismKind::CutPaste];

    pub fn label(&self) -> &'static str {
        match self {
            MechanismKind::DetGd => "DET-GD",
            MechanismKind::RanGd => "RAN-GD",
            MechanismKind::Mask => "MASK",
            MechanismKind::CutPaste => "C&P",
        }
    }

    /// Whether perturbed records live in the boolean cube rather than the categorical domain.
    pub fn is_boolean(&self) -> bool {
        matches!(self, MechanismKind::Mask | MechanismKind::CutPaste)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MechanismKind {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "detgd" | "det" | "gd" => Ok(MechanismKind::DetGd),
            "rangd" | "ran" => Ok(MechanismKind::RanGd),
            "mask" => Ok(MechanismKind::Mask),
            "cp" | "cutpaste" | "cutandpaste" => Ok(MechanismKind::CutPaste),
            _ => Err(PerturbError::Parameter(format!("unknown mechanism '{s}' (expected DET-GD, RAN-GD, MASK or C&P)"))),
        }
    }
}

/// A fully parameterized perturbation mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Mechanism {
    #[serde(rename = "DET-GD")]
    DetGd(GammaDiagonal),
    #[serde(rename = "RAN-GD")]
    RanGd(RandomizedGamma),
    #[serde(rename = "MASK")]
    Mask(MaskSpec),
    #[serde(rename = "C&P")]
    CutPaste(CutPasteSpec),
}

impl Mechanism {
    pub fn kind(&self) -> MechanismKind {
        match self {
            Mechanism::DetGd(_) => MechanismKind::DetGd,
            Mechanism::RanGd(_) => MechanismKind::RanGd,
            Mechanism::Mask(_) => MechanismKind::Mask,
            Mechanism::CutPaste(_) => MechanismKind::CutPaste,
        }
    }

    /// The gamma-diagonal matrix whose expectation the miner inverts, if any.
    pub fn expected_gamma_diagonal(&self) -> Option<&GammaDiagonal> {
        match self {
            Mechanism::DetGd(g) => Some(g),
            Mechanism::RanGd(r) => Some(r.base()),
            _ => None,
        }
    }

    /// Checks that the mechanism was built for this schema.
    pub fn check_schema(&self, schema: &Schema) -> Result<(), PerturbError> {
        let (expected, got) = match self {
            Mechanism::DetGd(g) => (g.domain_size(), schema.domain_size()),
            Mechanism::RanGd(r) => (r.base().domain_size(), schema.domain_size()),
            Mechanism::Mask(_) => return Ok(()),
            Mechanism::CutPaste(c) => {
                if c.record_ones() != schema.len() {
                    return Err(PerturbError::Dimension { expected: c.record_ones(), got: schema.len() });
                }
                (c.width(), schema.boolean_width())
            }
        };
        if expected != got {
            return Err(PerturbError::Dimension { expected, got });
        }
        Ok(())
    }
}

/// Output of a perturbation run.
#[derive(Clone, Debug, PartialEq)]
pub enum PerturbedData {
    Categorical(Dataset),
    Boolean(BooleanDataset),
}

impl PerturbedData {
    pub fn len(&self) -> usize {
        match self {
            PerturbedData::Categorical(d) => d.len(),
            PerturbedData::Boolean(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Perturbs every record independently; record `i` draws from its own stream
/// keyed by `(seed, i)`, so the output does not depend on thread count.
pub fn perturb_dataset(dataset: &Dataset, mechanism: &Mechanism, seed: u64) -> Result<PerturbedData, PerturbError> {
    let schema = dataset.schema();
    mechanism.check_schema(schema)?;
    let records = dataset.records();
    match mechanism {
        Mechanism::DetGd(g) => {
            let sampler = g.sampler(schema)?;
            let out = records
                .par_iter()
                .enumerate()
                .map(|(i, r)| sampler.sample(r, &mut rng::stream(seed, Purpose::Perturb, i as u64)))
                .collect();
            Ok(PerturbedData::Categorical(relabel(dataset, out, mechanism)))
        }
        Mechanism::RanGd(rg) => {
            let out: Result<Vec<Record>, PerturbError> = records
                .par_iter()
                .enumerate()
                .map(|(i, r)| {
                    let p = rg.client_params(seed, i as u64);
                    let sampler = ChainSampler::new(schema, p.diag, p.off)?;
                    Ok(sampler.sample(r, &mut rng::stream(seed, Purpose::Perturb, i as u64)))
                })
                .collect();
            Ok(PerturbedData::Categorical(relabel(dataset, out?, mechanism)))
        }
        Mechanism::Mask(spec) => {
            let rows: Vec<Vec<bool>> = records
                .par_iter()
                .enumerate()
                .map(|(i, r)| mask_perturb(&mask_expand(r, schema), spec.p(), &mut rng::stream(seed, Purpose::Perturb, i as u64)))
                .collect();
            Ok(PerturbedData::Boolean(BooleanDataset::from_rows(schema.boolean_width(), rows)))
        }
        Mechanism::CutPaste(spec) => {
            let rows: Vec<Vec<bool>> = records
                .par_iter()
                .enumerate()
                .map(|(i, r)| spec.perturb(&mask_expand(r, schema), &mut rng::stream(seed, Purpose::Perturb, i as u64)))
                .collect();
            Ok(PerturbedData::Boolean(BooleanDataset::from_rows(schema.boolean_width(), rows)))
        }
    }
}

fn relabel(source: &Dataset, records: Vec<Record>, mechanism: &Mechanism) -> Dataset {
    let provenance = format!("{} perturbation of {}", mechanism.kind(), source.provenance());
    Dataset::new(source.schema().clone(), records, provenance).expect("samplers emit in-domain records")
}
