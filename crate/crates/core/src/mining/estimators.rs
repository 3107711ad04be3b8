use super::{Itemset, MiningError, MiningOptions};
use crate::perturb::{mask_condition_number, BooleanDataset, ConditionNumber, CutPasteSpec, GammaDiagonal, MaskSpec, Mechanism, PerturbedData};
use crate::reconstruct::{count_marginals, SubsetIndexer, SubsetMarginal};
use crate::schema::{Dataset, Schema};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Estimated original supports of one pass's candidates, in candidate order.
#[derive(Clone, Debug, PartialEq)]
pub struct PassEstimate {
    pub supports: Vec<f64>,
    pub condition_number: Option<f64>,
    pub singular: bool,
}

pub trait SupportEstimator: Sync {
    fn name(&self) -> String;

    fn estimate(&self, candidates: &[Itemset], length: usize, options: &MiningOptions) -> Result<PassEstimate, MiningError>;
}

/// Candidate positions grouped by the attribute subset they range over.
fn group_by_subset(
    schema: &Schema,
    candidates: &[Itemset],
    options: &MiningOptions,
) -> Result<(Vec<SubsetIndexer>, Vec<Vec<usize>>), MiningError> {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        groups.entry(c.attributes()).or_default().push(i);
    }
    let mut indexers = Vec::with_capacity(groups.len());
    let mut members = Vec::with_capacity(groups.len());
    for (subset, idx) in groups {
        let ix = SubsetIndexer::new(schema, &subset)?;
        if ix.size() > options.max_subset_cells {
            return Err(MiningError::SubsetTooLarge { subset, cells: ix.size(), cap: options.max_subset_cells });
        }
        indexers.push(ix);
        members.push(idx);
    }
    Ok((indexers, members))
}

/// Relative marginals of every subset touched by the candidates, and a
/// lookup from each candidate to its subset.
fn relative_marginals(
    dataset: &Dataset,
    candidates: &[Itemset],
    options: &MiningOptions,
) -> Result<(Vec<SubsetIndexer>, Vec<Vec<usize>>, Vec<Vec<f64>>), MiningError> {
    let (indexers, members) = group_by_subset(dataset.schema(), candidates, options)?;
    let n = dataset.len() as f64;
    let marginals = count_marginals(dataset, &indexers)
        .into_iter()
        .map(|m| if n > 0.0 { m.scaled(n).into_counts() } else { m.into_counts() })
        .collect();
    Ok((indexers, members, marginals))
}

fn scatter(candidates: &[Itemset], indexers: &[SubsetIndexer], members: &[Vec<usize>], cells: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; candidates.len()];
    for ((ix, idx), cell) in indexers.iter().zip(members).zip(cells) {
        for &i in idx {
            out[i] = cell[ix.index_of(&candidates[i].categories())];
        }
    }
    out
}

/// Supports counted directly on unperturbed data.
pub struct ExactSupports<'a> {
    dataset: &'a Dataset,
}

impl<'a> ExactSupports<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        ExactSupports { dataset }
    }
}

impl SupportEstimator for ExactSupports<'_> {
    fn name(&self) -> String {
        "original".into()
    }

    fn estimate(&self, candidates: &[Itemset], _length: usize, options: &MiningOptions) -> Result<PassEstimate, MiningError> {
        let (ix, members, cells) = relative_marginals(self.dataset, candidates, options)?;
        Ok(PassEstimate { supports: scatter(candidates, &ix, &members, &cells), condition_number: Some(1.0), singular: false })
    }
}

/// Supports reconstructed from data perturbed by a gamma-diagonal matrix
/// (or a randomized one whose expectation it is).
pub struct GammaSupports<'a> {
    perturbed: &'a Dataset,
    spec: GammaDiagonal,
    name: String,
}

impl<'a> GammaSupports<'a> {
    pub fn new(perturbed: &'a Dataset, spec: GammaDiagonal, name: impl Into<String>) -> Result<Self, MiningError> {
        if spec.domain_size() != perturbed.schema().domain_size() {
            return Err(MiningError::Mismatch(format!(
                "matrix over {} values, schema domain has {}",
                spec.domain_size(),
                perturbed.schema().domain_size()
            )));
        }
        Ok(GammaSupports { perturbed, spec, name: name.into() })
    }
}

impl SupportEstimator for GammaSupports<'_> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn estimate(&self, candidates: &[Itemset], _length: usize, options: &MiningOptions) -> Result<PassEstimate, MiningError> {
        let (ix, members, cells) = relative_marginals(self.perturbed, candidates, options)?;
        let schema = self.perturbed.schema();
        let mut est = Vec::with_capacity(cells.len());
        for (indexer, cell) in ix.iter().zip(&cells) {
            if self.perturbed.is_empty() {
                est.push(cell.clone());
                continue;
            }
            let m = SubsetMarginal::new(schema, indexer.attributes(), &self.spec)?;
            est.push(m.reconstruct(cell)?);
        }
        Ok(PassEstimate {
            supports: scatter(candidates, &ix, &members, &est),
            condition_number: Some(self.spec.condition_number()),
            singular: false,
        })
    }
}

/// Feeds the analytically expected perturbed marginals (no sampling noise)
/// through the gamma-diagonal reconstruction.
pub struct ExpectedGammaSupports<'a> {
    original: &'a Dataset,
    spec: GammaDiagonal,
}

impl<'a> ExpectedGammaSupports<'a> {
    pub fn new(original: &'a Dataset, spec: GammaDiagonal) -> Self {
        ExpectedGammaSupports { original, spec }
    }
}

impl SupportEstimator for ExpectedGammaSupports<'_> {
    fn name(&self) -> String {
        "expected gamma-diagonal".into()
    }

    fn estimate(&self, candidates: &[Itemset], _length: usize, options: &MiningOptions) -> Result<PassEstimate, MiningError> {
        let (ix, members, cells) = relative_marginals(self.original, candidates, options)?;
        let schema = self.original.schema();
        let mut est = Vec::with_capacity(cells.len());
        for (indexer, cell) in ix.iter().zip(&cells) {
            let m = SubsetMarginal::new(schema, indexer.attributes(), &self.spec)?;
            est.push(m.reconstruct(&m.apply(cell))?);
        }
        Ok(PassEstimate {
            supports: scatter(candidates, &ix, &members, &est),
            condition_number: Some(self.spec.condition_number()),
            singular: false,
        })
    }
}

fn bit_positions(schema: &Schema, itemset: &Itemset) -> Vec<usize> {
    let offsets = schema.boolean_offsets();
    itemset.items().iter().map(|i| offsets[i.attribute] + i.category).collect()
}

/// Per-itemset MASK reconstruction over the `2^k` patterns of the itemset's bits.
pub struct MaskSupports<'a> {
    data: &'a BooleanDataset,
    schema: &'a Schema,
    spec: MaskSpec,
}

impl<'a> MaskSupports<'a> {
    pub fn new(data: &'a BooleanDataset, schema: &'a Schema, spec: MaskSpec) -> Result<Self, MiningError> {
        check_width(data, schema)?;
        Ok(MaskSupports { data, schema, spec })
    }
}

fn check_width(data: &BooleanDataset, schema: &Schema) -> Result<(), MiningError> {
    if data.width() != schema.boolean_width() {
        return Err(MiningError::Mismatch(format!("boolean width {} but schema expands to {}", data.width(), schema.boolean_width())));
    }
    Ok(())
}

impl SupportEstimator for MaskSupports<'_> {
    fn name(&self) -> String {
        "MASK".into()
    }

    fn estimate(&self, candidates: &[Itemset], length: usize, _options: &MiningOptions) -> Result<PassEstimate, MiningError> {
        let n = self.data.len() as f64;
        let supports: Result<Vec<f64>, MiningError> = candidates
            .par_iter()
            .map(|c| {
                if n == 0.0 {
                    return Ok(0.0);
                }
                let counts = self.data.pattern_counts(&bit_positions(self.schema, c));
                let rel: Vec<f64> = counts.iter().map(|x| x / n).collect();
                let est = self.spec.reconstruct_patterns(&rel)?;
                Ok(est[est.len() - 1])
            })
            .collect();
        Ok(PassEstimate {
            supports: supports?,
            condition_number: Some(mask_condition_number(length, self.spec.p())),
            singular: false,
        })
    }
}

/// Per-itemset cut-and-paste reconstruction over overlap classes `0..=k`.
pub struct CutPasteSupports<'a> {
    data: &'a BooleanDataset,
    schema: &'a Schema,
    spec: CutPasteSpec,
}

impl<'a> CutPasteSupports<'a> {
    pub fn new(data: &'a BooleanDataset, schema: &'a Schema, spec: CutPasteSpec) -> Result<Self, MiningError> {
        check_width(data, schema)?;
        Ok(CutPasteSupports { data, schema, spec })
    }
}

impl SupportEstimator for CutPasteSupports<'_> {
    fn name(&self) -> String {
        "C&P".into()
    }

    fn estimate(&self, candidates: &[Itemset], length: usize, _options: &MiningOptions) -> Result<PassEstimate, MiningError> {
        let matrix = self.spec.class_matrix(length)?;
        let cond = matrix.condition_number();
        if !cond.is_finite() {
            return Ok(PassEstimate { supports: Vec::new(), condition_number: Some(cond), singular: true });
        }
        let n = self.data.len() as f64;
        let supports: Result<Vec<f64>, MiningError> = candidates
            .par_iter()
            .map(|c| {
                if n == 0.0 {
                    return Ok(0.0);
                }
                let counts = self.data.overlap_counts(&bit_positions(self.schema, c));
                let rel: Vec<f64> = counts.iter().map(|x| x / n).collect();
                let est = matrix.solve(&rel)?;
                Ok(est[length])
            })
            .collect();
        Ok(PassEstimate { supports: supports?, condition_number: Some(cond), singular: false })
    }
}

/// Picks the estimator that inverts `mechanism` on its perturbed output.
pub struct EstimatorFactory;

impl EstimatorFactory {
    pub fn for_perturbed<'a>(
        perturbed: &'a PerturbedData,
        schema: &'a Schema,
        mechanism: &Mechanism,
    ) -> Result<Box<dyn SupportEstimator + 'a>, MiningError> {
        mechanism.check_schema(schema)?;
        match (mechanism, perturbed) {
            (Mechanism::DetGd(g), PerturbedData::Categorical(d)) => Ok(Box::new(GammaSupports::new(d, *g, "DET-GD")?)),
            (Mechanism::RanGd(r), PerturbedData::Categorical(d)) => Ok(Box::new(GammaSupports::new(d, *r.base(), "RAN-GD")?)),
            (Mechanism::Mask(m), PerturbedData::Boolean(b)) => Ok(Box::new(MaskSupports::new(b, schema, *m)?)),
            (Mechanism::CutPaste(c), PerturbedData::Boolean(b)) => Ok(Box::new(CutPasteSupports::new(b, schema, *c)?)),
            (m, _) => Err(MiningError::Mismatch(format!("{} cannot reconstruct from this kind of perturbed data", m.kind()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::{apriori, apriori_plain, apriori_reconstructed};
    use crate::perturb::{mask_expand, perturb_dataset, RandomizedGamma};
    use crate::schema::{generate_synthetic, DistributionSpec};
    use std::sync::Arc;

    fn skewed(n: usize, seed: u64) -> Dataset {
        let schema = Arc::new(Schema::from_cardinalities(&[3, 4, 2, 3]).unwrap());
        let weights: Vec<f64> = (0..schema.domain_size()).map(|i| if i % 5 == 0 { 30.0 } else { 1.0 + (i % 7) as f64 }).collect();
        generate_synthetic(schema, n, &DistributionSpec::Joint { weights }, seed).unwrap()
    }

    fn assert_same(a: &crate::mining::MiningResult, b: &crate::mining::MiningResult, tol: f64) {
        assert_eq!(a.counts(4), b.counts(4));
        for level in &a.levels {
            for f in &level.itemsets {
                let s = b.support(&f.itemset).expect("itemset present");
                assert!((s - f.support).abs() < tol, "{}: {} vs {}", f.itemset, s, f.support);
            }
        }
    }

    #[test]
    fn expected_marginals_reproduce_plain_mining() {
        let d = skewed(5000, 1);
        let g = GammaDiagonal::new(19.0, d.schema().domain_size()).unwrap();
        let plain = apriori_plain(&d, 0.03).unwrap();
        let noiseless = apriori(d.schema(), &ExpectedGammaSupports::new(&d, g), 0.03, &MiningOptions::default()).unwrap();
        assert_same(&plain, &noiseless, 1e-9);
    }

    #[test]
    fn near_identity_perturbation_recovers_itemsets() {
        let d = skewed(5000, 2);
        let g = GammaDiagonal::new(1e9, d.schema().domain_size()).unwrap();
        let m = Mechanism::DetGd(g);
        let p = perturb_dataset(&d, &m, 3).unwrap();
        let mined = apriori_reconstructed(&p, d.schema(), &m, 0.03, &MiningOptions::default()).unwrap();
        assert_same(&apriori_plain(&d, 0.03).unwrap(), &mined, 1e-6);
    }

    #[test]
    fn mask_and_cut_paste_identity_limits() {
        let d = skewed(3000, 4);
        let plain = apriori_plain(&d, 0.05).unwrap();
        let mask = Mechanism::Mask(MaskSpec::new(1.0).unwrap());
        let p = perturb_dataset(&d, &mask, 1).unwrap();
        assert_same(&plain, &apriori_reconstructed(&p, d.schema(), &mask, 0.05, &MiningOptions::default()).unwrap(), 1e-9);

        // rho = 0 pastes nothing, so every output is a subset of its input
        let schema = d.schema();
        let cp = Mechanism::CutPaste(CutPasteSpec::new(4, 0.0, 4, schema.boolean_width()).unwrap());
        let p = perturb_dataset(&d, &cp, 1).unwrap();
        let PerturbedData::Boolean(b) = &p else { unreachable!() };
        for (row, r) in b.rows().zip(d.records()) {
            let input = mask_expand(r, schema);
            assert!(row.iter().zip(&input).all(|(o, i)| !o || *i));
        }
    }

    #[test]
    fn cut_paste_goes_singular_past_cut() {
        let d = skewed(3000, 5);
        let spec = CutPasteSpec::new(2, 0.3, 4, d.schema().boolean_width()).unwrap();
        let m = Mechanism::CutPaste(spec);
        let p = perturb_dataset(&d, &m, 1).unwrap();
        let r = apriori_reconstructed(&p, d.schema(), &m, 0.02, &MiningOptions::default()).unwrap();
        for level in &r.levels {
            assert_eq!(level.diagnostics.singular, level.length > 2, "length {}", level.length);
        }
        assert!(r.max_length() <= 2);
    }

    #[test]
    fn randomized_reconstruction_uses_expected_matrix() {
        let d = skewed(100_000, 6);
        let g = GammaDiagonal::new(19.0, d.schema().domain_size()).unwrap();
        let m = Mechanism::RanGd(RandomizedGamma::from_fraction(g, 0.5).unwrap());
        let p = perturb_dataset(&d, &m, 2).unwrap();
        let r = apriori_reconstructed(&p, d.schema(), &m, 0.03, &MiningOptions::default()).unwrap();
        assert_eq!(r.mechanism, "RAN-GD");
        assert!(r.levels.iter().all(|l| l.diagnostics.condition_number == Some(g.condition_number())));
        let plain = apriori_plain(&d, 0.03).unwrap();
        for f in plain.itemsets(1) {
            let s = r.support(&f.itemset).unwrap();
            // cond 5 times the binomial standard error of about 0.0016
            assert!((s - f.support).abs() < 0.04, "{}: {s} vs {}", f.itemset, f.support);
        }
    }

    #[test]
    fn mismatches_are_errors() {
        let d = skewed(100, 7);
        let g = GammaDiagonal::new(19.0, d.schema().domain_size()).unwrap();
        let p = perturb_dataset(&d, &Mechanism::DetGd(g), 1).unwrap();
        let mask = Mechanism::Mask(MaskSpec::new(0.6).unwrap());
        assert!(apriori_reconstructed(&p, d.schema(), &mask, 0.1, &MiningOptions::default()).is_err());
        let other = GammaDiagonal::new(19.0, 10).unwrap();
        assert!(apriori_reconstructed(&p, d.schema(), &Mechanism::DetGd(other), 0.1, &MiningOptions::default()).is_err());
        let tight = MiningOptions { max_subset_cells: 10, max_length: None };
        assert!(matches!(
            apriori_reconstructed(&p, d.schema(), &Mechanism::DetGd(g), 0.01, &tight),
            Err(MiningError::SubsetTooLarge { .. })
        ));
    }

    #[test]
    fn deterministic_results() {
        let d = skewed(4000, 8);
        let g = GammaDiagonal::new(19.0, d.schema().domain_size()).unwrap();
        let m = Mechanism::DetGd(g);
        let run = || {
            let p = perturb_dataset(&d, &m, 9).unwrap();
            serde_json::to_string(&apriori_reconstructed(&p, d.schema(), &m, 0.02, &MiningOptions::default()).unwrap()).unwrap()
        };
        assert_eq!(run(), run());
    }
}
