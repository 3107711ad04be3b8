use super::matrix::MaterializedMatrix;
use super::PerturbError;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Widest boolean itemset whose `2^k x 2^k` MASK matrix is materialized.
pub const MAX_MASK_WIDTH: usize = 12;

/// Independent bit flipping: every bit is kept with probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    p: f64,
}

impl MaskSpec {
    pub fn new(p: f64) -> Result<Self, PerturbError> {
        if !(0.5..1.0).contains(&p) && p != 1.0 {
            return Err(PerturbError::Parameter(format!("MASK retention probability must lie in [0.5, 1], got {p}")));
        }
        Ok(MaskSpec { p })
    }

    /// The least noisy `p` meeting the ratio bound `gamma` for records with `m` ones.
    pub fn for_gamma(gamma: f64, m: usize) -> Result<Self, PerturbError> {
        if !(gamma >= 1.0) || m == 0 {
            return Err(PerturbError::Parameter(format!("need gamma >= 1 and at least one attribute, got ({gamma}, {m})")));
        }
        MaskSpec::new(mask_p_for_gamma(gamma, m))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `P(u -> v)` over `width` bits that agree in `matches` positions.
    pub fn entry(&self, matches: usize, width: usize) -> f64 {
        self.p.powi(matches as i32) * (1.0 - self.p).powi((width - matches) as i32)
    }

    /// Largest row ratio between two records that each carry `m` ones:
    /// they differ in at most `2m` bits.
    pub fn max_ratio(&self, m: usize) -> f64 {
        (self.p / (1.0 - self.p)).powi(2 * m as i32)
    }

    pub fn itemset_matrix(&self, k: usize) -> Result<MaterializedMatrix, PerturbError> {
        mask_matrix(k, self.p)
    }

    pub fn itemset_condition_number(&self, k: usize) -> f64 {
        mask_condition_number(k, self.p)
    }

    /// Solves the `2^k` itemset system through the Kronecker structure of
    /// the inverse, `(B^-1)^{(x)k}` with `B = [[p, 1-p], [1-p, p]]`.
    pub fn reconstruct_patterns(&self, observed: &[f64]) -> Result<Vec<f64>, PerturbError> {
        let k = observed.len().trailing_zeros() as usize;
        if observed.len() != 1 << k {
            return Err(PerturbError::Dimension { expected: 1 << k, got: observed.len() });
        }
        let det = 2.0 * self.p - 1.0;
        if det.abs() < f64::EPSILON {
            return Err(PerturbError::Singular);
        }
        let (a, b) = (self.p / det, -(1.0 - self.p) / det);
        let mut out = observed.to_vec();
        for bit in 0..k {
            let step = 1 << bit;
            for base in 0..out.len() {
                if base & step == 0 {
                    let (y0, y1) = (out[base], out[base | step]);
                    out[base] = a * y0 + b * y1;
                    out[base | step] = b * y0 + a * y1;
                }
            }
        }
        Ok(out)
    }
}

/// `p = g / (1 + g)` with `g = gamma^(1 / 2m)`, the root of `(p / (1-p))^{2m} = gamma`.
pub fn mask_p_for_gamma(gamma: f64, m: usize) -> f64 {
    let g = gamma.powf(1.0 / (2.0 * m as f64));
    g / (1.0 + g)
}

/// Transition matrix over all `2^k` patterns of `k` bits; bit `b` of an
/// index is the value of the `b`-th bit.
pub fn mask_matrix(k: usize, p: f64) -> Result<MaterializedMatrix, PerturbError> {
    if k == 0 || k > MAX_MASK_WIDTH {
        return Err(PerturbError::TooLarge { rows: 1 << k.min(63), cols: 1 << k.min(63) });
    }
    let n = 1usize << k;
    let spec = MaskSpec { p };
    Ok(MaterializedMatrix::from_fn(n, n, |v, u| {
        let matches = k - (u ^ v).count_ones() as usize;
        spec.entry(matches, k)
    }))
}

/// The itemset matrix is the k-fold Kronecker power of a 2x2 matrix with
/// eigenvalues 1 and `2p - 1`, so its condition number is `|2p - 1|^-k`.
pub fn mask_condition_number(k: usize, p: f64) -> f64 {
    let lambda = (2.0 * p - 1.0).abs();
    if lambda == 0.0 {
        f64::INFINITY
    } else {
        lambda.powi(-(k as i32))
    }
}

/// Flips every bit independently with probability `1 - p`.
pub fn mask_perturb<R: Rng + ?Sized>(bits: &[bool], p: f64, rng: &mut R) -> Vec<bool> {
    bits.iter().map(|&b| if rng.gen::<f64>() < p { b } else { !b }).collect()
}
