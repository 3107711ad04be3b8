use super::mask::MAX_MASK_WIDTH;
use super::matrix::MaterializedMatrix;
use super::PerturbError;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Cut-and-paste randomization of boolean records.
///
/// Draw `j` uniformly from `0..=K` and clamp it to the record's `m` ones;
/// keep `j` of those ones chosen at random, then insert every other item
/// independently with probability `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutPasteSpec {
    cut: usize,
    rho: f64,
    record_ones: usize,
    width: usize,
}

/// `n choose k` as a float, zero outside `0 <= k <= n`.
fn binom(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl CutPasteSpec {
    pub fn new(cut: usize, rho: f64, record_ones: usize, width: usize) -> Result<Self, PerturbError> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(PerturbError::Parameter(format!("paste probability must lie in [0, 1], got {rho}")));
        }
        if cut > record_ones {
            return Err(PerturbError::Parameter(format!("cut parameter {cut} exceeds record size {record_ones}")));
        }
        if record_ones == 0 || record_ones > width {
            return Err(PerturbError::Parameter(format!("record size {record_ones} must lie in [1, {width}]")));
        }
        Ok(CutPasteSpec { cut, rho, record_ones, width })
    }

    pub fn cut(&self) -> usize {
        self.cut
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn record_ones(&self) -> usize {
        self.record_ones
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Probability that exactly `w` ones are kept by the cut from a record of `m` ones.
    pub fn cut_probability(&self, w: usize, m: usize) -> f64 {
        let k1 = (self.cut + 1) as f64;
        if w > m || w > self.cut {
            0.0
        } else if w == m {
            1.0 - m as f64 / k1
        } else {
            1.0 / k1
        }
    }

    /// `p_m[z]`: probability that exactly `z` of the record's `m` ones survive
    /// (kept by the cut or pasted back).
    pub fn survivor_distribution_for(&self, m: usize) -> Vec<f64> {
        (0..=m)
            .map(|z| {
                (0..=self.cut.min(z))
                    .map(|w| {
                        binom((m - w) as i64, (z - w) as i64)
                            * self.rho.powi((z - w) as i32)
                            * (1.0 - self.rho).powi((m - z) as i32)
                            * self.cut_probability(w, m)
                    })
                    .sum()
            })
            .collect()
    }

    pub fn survivor_distribution(&self) -> Vec<f64> {
        self.survivor_distribution_for(self.record_ones)
    }

    /// Transition matrix between overlap classes of a `k`-item itemset:
    /// entry `(l_v, l_u)` is the probability that a record holding `l_u` of
    /// the items is perturbed into one holding `l_v` of them.
    pub fn class_matrix(&self, k: usize) -> Result<MaterializedMatrix, PerturbError> {
        let m = self.record_ones as i64;
        if k > self.width {
            return Err(PerturbError::Dimension { expected: self.width, got: k });
        }
        let p = self.survivor_distribution();
        let ki = k as i64;
        let mut out = nalgebra::DMatrix::zeros(k + 1, k + 1);
        for lu in 0..=ki {
            for lv in 0..=ki {
                let mut total = 0.0;
                for (z, pz) in p.iter().enumerate() {
                    let z = z as i64;
                    let lo = 0.max(z + lu - m).max(lu + lv - ki);
                    let hi = z.min(lu).min(lv);
                    for q in lo..=hi {
                        total += pz * binom(lu, q) * binom(m - lu, z - q) / binom(m, z)
                            * binom(ki - lu, lv - q)
                            * self.rho.powi((lv - q) as i32)
                            * (1.0 - self.rho).powi((ki - lu - lv + q) as i32);
                    }
                }
                if total < 0.0 {
                    return Err(PerturbError::NegativeProbability { row: lv as usize, col: lu as usize, value: total });
                }
                out[(lv as usize, lu as usize)] = total;
            }
        }
        let matrix = MaterializedMatrix::new(out);
        if !matrix.is_stochastic(1e-8) {
            return Err(PerturbError::Parameter(format!(
                "cut-and-paste class matrix is not stochastic (deviation {})",
                matrix.max_column_deviation()
            )));
        }
        Ok(matrix)
    }

    /// `P(u -> v)` for boolean records over the full width.
    pub fn transition(&self, u: &[bool], v: &[bool]) -> f64 {
        let m = u.iter().filter(|&&b| b).count();
        let lv = v.iter().filter(|&&b| b).count();
        let s = u.iter().zip(v).filter(|(&a, &b)| a && b).count();
        let p = self.survivor_distribution_for(m);
        let pasted = lv - s;
        p[s] / binom(m as i64, s as i64)
            * self.rho.powi(pasted as i32)
            * (1.0 - self.rho).powi((self.width - m - pasted) as i32)
    }

    /// Full transition matrix over the boolean cube; bit `b` of an index is item `b`.
    pub fn cube_matrix(&self) -> Result<MaterializedMatrix, PerturbError> {
        if self.width > MAX_MASK_WIDTH {
            return Err(PerturbError::TooLarge { rows: 1 << self.width, cols: 1 << self.width });
        }
        let n = 1usize << self.width;
        let bits = |x: usize| (0..self.width).map(|b| x >> b & 1 == 1).collect::<Vec<_>>();
        let patterns: Vec<Vec<bool>> = (0..n).map(bits).collect();
        Ok(MaterializedMatrix::from_fn(n, n, |v, u| self.transition(&patterns[u], &patterns[v])))
    }

    /// Largest and smallest entry of the row with the widest spread, over
    /// inputs with exactly `record_ones` ones. For a fixed output with `l_v`
    /// ones the entry depends on the input only through the overlap `s`.
    pub fn extremal_entries(&self) -> (f64, f64) {
        let m = self.record_ones;
        let p = self.survivor_distribution();
        let mut worst = (1.0, 1.0);
        let mut worst_ratio = 1.0;
        for lv in 0..=self.width {
            let lo = lv.saturating_sub(self.width - m);
            let hi = m.min(lv);
            let entries = (lo..=hi).map(|s| {
                p[s] / binom(m as i64, s as i64)
                    * self.rho.powi((lv - s) as i32)
                    * (1.0 - self.rho).powi((self.width - m - (lv - s)) as i32)
            });
            let (max, min) = entries.fold((f64::MIN, f64::MAX), |(a, b), e| (a.max(e), b.min(e)));
            let ratio = if min > 0.0 { max / min } else { f64::INFINITY };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst = (max, min);
            }
        }
        worst
    }

    /// Largest ratio between two entries of a row (see [`Self::extremal_entries`]).
    pub fn amplification(&self) -> f64 {
        let (max, min) = self.extremal_entries();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    /// Applies the operator to one boolean record.
    pub fn perturb<R: Rng + ?Sized>(&self, bits: &[bool], rng: &mut R) -> Vec<bool> {
        let ones: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        let j = rng.gen_range(0..=self.cut).min(ones.len());
        let mut out = vec![false; bits.len()];
        let mut kept = vec![false; bits.len()];
        for i in index::sample(rng, ones.len(), j) {
            out[ones[i]] = true;
            kept[ones[i]] = true;
        }
        for (slot, was_kept) in out.iter_mut().zip(kept) {
            if !was_kept && rng.gen::<f64>() < self.rho {
                *slot = true;
            }
        }
        out
    }
}
