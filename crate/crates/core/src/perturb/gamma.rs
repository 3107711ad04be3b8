use super::matrix::{ConditionNumber, MaterializedMatrix};
use super::PerturbError;
use crate::privacy::{self, PosteriorAnalysis};
use crate::rng;
use crate::schema::{Record, Schema};
use rand::Rng;
use serde::{Deserialize, Serialize};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Gamma-diagonal matrix: `gamma * x` on the diagonal, `x` elsewhere, with
/// `x = 1 / (gamma + n - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaDiagonal {
    gamma: f64,
    n: usize,
    x: f64,
}

impl GammaDiagonal {
    pub fn new(gamma: f64, n: usize) -> Result<Self, PerturbError> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(PerturbError::Parameter(format!("gamma must be finite and > 1, got {gamma}")));
        }
        if n < 2 {
            return Err(PerturbError::Parameter(format!("domain size must be at least 2, got {n}")));
        }
        Ok(GammaDiagonal { gamma, n, x: 1.0 / (gamma + n as f64 - 1.0) })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn diagonal(&self) -> f64 {
        self.gamma * self.x
    }

    pub fn off_diagonal(&self) -> f64 {
        self.x
    }

    /// `P(u -> v)`
    pub fn entry(&self, u: usize, v: usize) -> f64 {
        debug_assert!(u < self.n && v < self.n);
        if u == v {
            self.diagonal()
        } else {
            self.x
        }
    }

    pub fn materialize(&self) -> Result<MaterializedMatrix, PerturbError> {
        if self.n > 4096 {
            return Err(PerturbError::TooLarge { rows: self.n, cols: self.n });
        }
        Ok(MaterializedMatrix::from_fn(self.n, self.n, |v, u| self.entry(u, v)))
    }

    pub fn client_params(&self) -> ClientParams {
        ClientParams { diag: self.diagonal(), off: self.x }
    }

    pub fn sampler(&self, schema: &Schema) -> Result<ChainSampler, PerturbError> {
        if schema.domain_size() != self.n {
            return Err(PerturbError::Dimension { expected: self.n, got: schema.domain_size() });
        }
        ChainSampler::new(schema, self.diagonal(), self.x)
    }

    pub fn posterior_analysis(&self, rho1: f64) -> PosteriorAnalysis {
        PosteriorAnalysis::from_entries(rho1, self.diagonal(), self.x)
    }
}

impl ConditionNumber for GammaDiagonal {
    /// `1 + n / (gamma - 1)`
    fn condition_number(&self) -> f64 {
        (self.gamma + self.n as f64 - 1.0) / (self.gamma - 1.0)
    }
}

/// One client's realized diagonal/off-diagonal pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClientParams {
    pub diag: f64,
    pub off: f64,
}

/// Gamma-diagonal matrix whose diagonal is shifted per client by
/// `r ~ U[-alpha, alpha]`, with the off-diagonal entries compensating by
/// `-r / (n - 1)` so every realization stays column-stochastic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedGamma {
    base: GammaDiagonal,
    alpha: f64,
}

impl RandomizedGamma {
    pub fn new(base: GammaDiagonal, alpha: f64) -> Result<Self, PerturbError> {
        let limit = privacy::max_alpha(base.gamma, base.n);
        if !(alpha >= 0.0 && alpha <= limit * (1.0 + 1e-12)) {
            return Err(PerturbError::Parameter(format!("alpha {alpha} outside [0, {limit}]")));
        }
        Ok(RandomizedGamma { base, alpha: alpha.min(limit) })
    }

    /// `alpha = fraction * gamma * x`
    pub fn from_fraction(base: GammaDiagonal, fraction: f64) -> Result<Self, PerturbError> {
        RandomizedGamma::new(base, fraction * base.diagonal())
    }

    pub fn base(&self) -> &GammaDiagonal {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn params_for(&self, r: f64) -> ClientParams {
        let n1 = self.base.n as f64 - 1.0;
        ClientParams { diag: self.base.diagonal() + r, off: self.base.x - r / n1 }
    }

    pub fn draw_client_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ClientParams {
        let r = if self.alpha == 0.0 { 0.0 } else { rng.gen_range(-self.alpha..=self.alpha) };
        self.params_for(r)
    }

    /// The draw of client `index` under `seed`; the miner never sees these.
    pub fn client_params(&self, seed: u64, index: u64) -> ClientParams {
        let mut rng = rng::stream(seed, rng::Purpose::ClientParams, index);
        self.draw_client_params(&mut rng)
    }

    /// Largest entry ratio any realization can show, `(gamma x + alpha) / (x - alpha/(n-1))`.
    pub fn max_realized_ratio(&self) -> f64 {
        let p = self.params_for(self.alpha);
        p.diag / p.off
    }

    pub fn posterior_analysis(&self, rho1: f64) -> Result<PosteriorAnalysis, PerturbError> {
        let fraction = self.alpha / self.base.diagonal();
        let range = privacy::posterior_range(rho1, self.base.gamma, fraction, self.base.n)
            .map_err(|e| PerturbError::Parameter(e.to_string()))?;
        Ok(self.base.posterior_analysis(rho1).with_range(range))
    }
}

/// Dependent-column sampler for any matrix with `d` on the diagonal and `o`
/// elsewhere (`d + (n - 1) o = 1`).
///
/// Attribute `j` is drawn conditioned on the perturbed prefix. While the
/// prefix still equals the original record, the original value of attribute
/// `j` has joint mass `d + (n_M / n_j - 1) o` and every other value
/// `(n_M / n_j) o`; each is divided by the joint mass of the prefix. Once the
/// prefix deviates, every value of the remaining attributes is equally likely.
#[derive(Clone, Debug)]
pub struct ChainSampler {
    cards: Vec<usize>,
    /// `n_M / n_j` for `j = 1..=M`
    tail: Vec<f64>,
    diag: f64,
    off: f64,
}

impl ChainSampler {
    pub fn new(schema: &Schema, diag: f64, off: f64) -> Result<Self, PerturbError> {
        let n = schema.domain_size();
        if !(diag > 0.0 && off > 0.0) || ((diag + (n as f64 - 1.0) * off) - 1.0).abs() > STOCHASTIC_TOL {
            return Err(PerturbError::Parameter(format!(
                "(d, o) = ({diag}, {off}) does not satisfy d + (n-1) o = 1 with d, o > 0 for n = {n}"
            )));
        }
        let radix = schema.radix_prefix();
        let tail = (1..radix.len()).map(|j| (n / radix[j]) as f64).collect();
        Ok(ChainSampler { cards: schema.cardinalities(), tail, diag, off })
    }

    fn joint(&self, j: usize, on_diagonal: bool) -> f64 {
        if on_diagonal {
            self.diag + (self.tail[j] - 1.0) * self.off
        } else {
            self.tail[j] * self.off
        }
    }

    /// Conditional probability of choosing `value` for attribute `j`, and the
    /// new prefix mass, given the prefix mass and match state so far.
    fn step(&self, j: usize, prefix: f64, matched: bool, original: usize, value: usize) -> (f64, f64) {
        let joint = self.joint(j, matched && value == original);
        (joint / prefix, joint)
    }

    /// Samples using caller-supplied uniforms on `(0, 1]`, one per attribute.
    pub fn sample_with(&self, record: &Record, mut uniform: impl FnMut() -> f64) -> Record {
        let mut prefix = 1.0;
        let mut matched = true;
        let mut out = Vec::with_capacity(self.cards.len());
        for (j, &card) in self.cards.iter().enumerate() {
            let original = record.values()[j];
            let r = uniform();
            // Walk the original value first: it carries the bulk of the mass.
            let order = std::iter::once(original).chain((0..card).filter(|&a| a != original));
            let mut acc = 0.0;
            let mut chosen = None;
            for a in order {
                let (p, joint) = self.step(j, prefix, matched, original, a);
                acc += p;
                chosen = Some((a, joint));
                if r <= acc {
                    break;
                }
            }
            let (a, joint) = chosen.expect("attribute has categories");
            prefix = joint;
            matched &= a == original;
            out.push(a);
        }
        Record::new(out)
    }

    pub fn sample<R: Rng + ?Sized>(&self, record: &Record, rng: &mut R) -> Record {
        self.sample_with(record, || rng::open_closed_unit(rng))
    }

    /// Product of the conditionals along the path that turns `input` into `output`.
    pub fn path_probability(&self, input: &Record, output: &Record) -> f64 {
        let mut prefix = 1.0;
        let mut matched = true;
        let mut prob = 1.0;
        for j in 0..self.cards.len() {
            let (u, v) = (input.values()[j], output.values()[j]);
            let (p, joint) = self.step(j, prefix, matched, u, v);
            prob *= p;
            prefix = joint;
            matched &= u == v;
        }
        prob
    }

    /// Probability of every encoded output for `input`, multiplying the
    /// sampler's conditionals over the whole prefix tree.
    pub fn output_distribution(&self, input: &Record) -> Vec<f64> {
        let n: usize = self.cards.iter().product();
        let mut out = vec![0.0; n];
        self.expand(input, 0, 1.0, 1.0, true, 0, 1, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn expand(&self, input: &Record, j: usize, prob: f64, prefix: f64, matched: bool, index: usize, stride: usize, out: &mut [f64]) {
        if j == self.cards.len() {
            out[index] = prob;
            return;
        }
        let u = input.values()[j];
        for a in 0..self.cards[j] {
            let (p, joint) = self.step(j, prefix, matched, u, a);
            self.expand(input, j + 1, prob * p, joint, matched && a == u, index + a * stride, stride * self.cards[j], out);
        }
    }
}

/// Perturbs one record with diagonal `diag` and off-diagonal `off`.
pub fn perturb_chain<R: Rng + ?Sized>(
    record: &Record,
    diag: f64,
    off: f64,
    schema: &Schema,
    rng: &mut R,
) -> Result<Record, PerturbError> {
    Ok(ChainSampler::new(schema, diag, off)?.sample(record, rng))
}
