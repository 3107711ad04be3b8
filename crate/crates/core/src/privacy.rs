//! Privacy calculus for amplification-bounded perturbation.
//!
//! A mechanism whose matrix entries in every row differ by at most a factor
//! `gamma` guarantees that a property with prior below `rho1` has posterior
//! below `rho2`, where `gamma = odds(rho2) / odds(rho1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("privacy target needs 0 < rho1 < rho2 < 1, got ({rho1}, {rho2})")]
    InvalidTarget { rho1: f64, rho2: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyTarget {
    rho1: f64,
    rho2: f64,
}

impl PrivacyTarget {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self, PrivacyError> {
        if !(rho1 > 0.0 && rho1 < rho2 && rho2 < 1.0) {
            return Err(PrivacyError::InvalidTarget { rho1, rho2 });
        }
        Ok(PrivacyTarget { rho1, rho2 })
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// Largest admissible entry ratio, `rho2 (1 - rho1) / (rho1 (1 - rho2))`.
pub fn gamma_for(target: PrivacyTarget) -> f64 {
    odds(target.rho2) / odds(target.rho1)
}

/// Posterior of a property with the given prior when the observed row has
/// `maxp` on the property's values and `minp` elsewhere.
pub fn posterior(prior: f64, maxp: f64, minp: f64) -> f64 {
    1.0 / (1.0 + (1.0 - prior) * minp / (prior * maxp))
}

/// Worst-case posterior when `maxp / minp` reaches `gamma`.
pub fn worst_case_posterior(rho1: f64, gamma: f64) -> f64 {
    1.0 / (1.0 + (1.0 - rho1) / (rho1 * gamma))
}

/// Worst-case posterior for a client whose randomized gamma-diagonal draw is
/// `r`: diagonal `gamma x + r`, off-diagonal `x - r / (n - 1)`.
pub fn posterior_at(rho1: f64, gamma: f64, domain_size: usize, r: f64) -> f64 {
    let x = 1.0 / (gamma + domain_size as f64 - 1.0);
    posterior(rho1, gamma * x + r, x - r / (domain_size as f64 - 1.0))
}

/// Largest `alpha` that keeps every randomized entry non-negative.
pub fn max_alpha(gamma: f64, domain_size: usize) -> f64 {
    let x = 1.0 / (gamma + domain_size as f64 - 1.0);
    (gamma * x).min((domain_size as f64 - 1.0) * x)
}

/// `[rho2(-alpha), rho2(+alpha)]` with `alpha = alpha_fraction * gamma * x`.
pub fn posterior_range(
    rho1: f64,
    gamma: f64,
    alpha_fraction: f64,
    domain_size: usize,
) -> Result<(f64, f64), PrivacyError> {
    if domain_size < 2 {
        return Err(PrivacyError::Parameter(format!("domain size {domain_size} < 2")));
    }
    if !(gamma >= 1.0) {
        return Err(PrivacyError::Parameter(format!("gamma {gamma} < 1")));
    }
    if !(alpha_fraction >= 0.0) {
        return Err(PrivacyError::Parameter(format!("alpha fraction {alpha_fraction} is negative")));
    }
    let x = 1.0 / (gamma + domain_size as f64 - 1.0);
    let alpha = alpha_fraction * gamma * x;
    if alpha > max_alpha(gamma, domain_size) * (1.0 + 1e-12) {
        return Err(PrivacyError::Parameter(format!(
            "alpha {alpha} makes entries negative (max {})",
            max_alpha(gamma, domain_size)
        )));
    }
    Ok((posterior_at(rho1, gamma, domain_size, -alpha), posterior_at(rho1, gamma, domain_size, alpha)))
}

/// `rho2(r)` sampled at `steps + 1` evenly spaced points of `[-alpha, alpha]`.
pub fn posterior_curve(rho1: f64, gamma: f64, domain_size: usize, alpha: f64, steps: usize) -> Vec<(f64, f64)> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let r = -alpha + 2.0 * alpha * i as f64 / steps as f64;
            (r, posterior_at(rho1, gamma, domain_size, r))
        })
        .collect()
}

/// Worst-case privacy picture of one mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorAnalysis {
    pub gamma: f64,
    pub maxp: f64,
    pub minp: f64,
    pub posterior: f64,
    pub posterior_range: Option<(f64, f64)>,
}

impl PosteriorAnalysis {
    pub fn from_entries(rho1: f64, maxp: f64, minp: f64) -> Self {
        PosteriorAnalysis { gamma: maxp / minp, maxp, minp, posterior: posterior(rho1, maxp, minp), posterior_range: None }
    }

    pub fn with_range(mut self, range: (f64, f64)) -> Self {
        self.posterior_range = Some(range);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_for(PrivacyTarget::new(0.05, 0.50).unwrap()), 19.0);
        let g = gamma_for(PrivacyTarget::new(0.01, 0.50).unwrap());
        assert!((g - 99.0).abs() < 1e-12);
        let near = gamma_for(PrivacyTarget::new(0.3, 0.3 + 1e-9).unwrap());
        assert!((near - 1.0).abs() < 1e-7);
    }

    #[test]
    fn target_validation() {
        assert!(PrivacyTarget::new(0.5, 0.5).is_err());
        assert!(PrivacyTarget::new(0.0, 0.5).is_err());
        assert!(PrivacyTarget::new(0.2, 1.0).is_err());
        assert!(PrivacyTarget::new(0.6, 0.5).is_err());
        assert!(PrivacyTarget::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn worst_case_examples() {
        assert_eq!(worst_case_posterior(0.05, 19.0), 0.5);
        assert!((worst_case_posterior(0.3, 1.0) - 0.3).abs() < 1e-15);
        assert!((worst_case_posterior(0.01, 19.0) - 0.19 / 1.18).abs() < 1e-12);
        assert!((worst_case_posterior(0.01, 19.0) - 0.1610).abs() < 1e-4);
    }

    #[test]
    fn census_posterior_range() {
        let (lo, hi) = posterior_range(0.05, 19.0, 0.5, 2000).unwrap();
        assert!((lo - 0.333).abs() < 0.005, "{lo}");
        assert!((hi - 0.600).abs() < 0.005, "{hi}");
    }

    #[test]
    fn small_domain_range_by_hand() {
        // n = 20: x = 1/38, gamma x = 1/2, alpha = 1/4.
        // r = -1/4: maxp = 1/4, minp = 3/76 -> 0.0125 / 0.05 = 1/4
        // r = +1/4: maxp = 3/4, minp = 1/76 -> 0.0375 / 0.05 = 3/4
        let (lo, hi) = posterior_range(0.05, 19.0, 0.5, 20).unwrap();
        assert!((lo - 0.25).abs() < 1e-12, "{lo}");
        assert!((hi - 0.75).abs() < 1e-12, "{hi}");
    }

    #[test]
    fn degenerate_range() {
        let (lo, hi) = posterior_range(0.05, 19.0, 0.0, 2000).unwrap();
        let p = worst_case_posterior(0.05, 19.0);
        assert!((lo - p).abs() < 1e-15 && (hi - p).abs() < 1e-15);
    }

    #[test]
    fn range_rejects_negative_entries() {
        // n = 2: (n-1)x = x < gamma x, so alpha = gamma x overshoots.
        assert!(posterior_range(0.05, 19.0, 1.0, 2).is_err());
        assert!(posterior_range(0.05, 19.0, 1.0, 2000).is_ok());
        assert!(posterior_range(0.05, 19.0, 1.01, 2000).is_err());
        assert!(posterior_range(0.05, 19.0, -0.1, 2000).is_err());
    }

    #[test]
    fn curve_endpoints_match_range() {
        let alpha = 0.5 * 19.0 / 2018.0;
        let c = posterior_curve(0.05, 19.0, 2000, alpha, 10);
        let (lo, hi) = posterior_range(0.05, 19.0, 0.5, 2000).unwrap();
        assert!((c[0].1 - lo).abs() < 1e-15 && (c[10].1 - hi).abs() < 1e-15);
        assert!(c.windows(2).all(|w| w[0].1 < w[1].1));
    }

    fn target() -> impl Strategy<Value = (f64, f64)> {
        (0.001f64..0.99, 0.0f64..1.0).prop_map(|(a, t)| (a, a + (0.999 - a) * t.max(1e-6)))
    }

    proptest! {
        #[test]
        fn gamma_round_trip((r1, r2) in target()) {
            prop_assume!(r2 > r1 && r2 < 1.0);
            let g = gamma_for(PrivacyTarget::new(r1, r2).unwrap());
            prop_assert!((worst_case_posterior(r1, g) - r2).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_prior_and_gamma(r in 0.01f64..0.9, dr in 0.001f64..0.05, g in 1.0f64..100.0, dg in 0.01f64..10.0) {
            prop_assert!(worst_case_posterior(r + dr, g) > worst_case_posterior(r, g));
            prop_assert!(worst_case_posterior(r, g + dg) > worst_case_posterior(r, g));
        }

        #[test]
        fn ranges_nest(r in 0.01f64..0.5, g in 1.5f64..50.0, n in 2usize..5000, f1 in 0.0f64..0.5, f2 in 0.0f64..0.5) {
            let (small, large) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let limit = max_alpha(g, n) / (g / (g + n as f64 - 1.0));
            prop_assume!(large <= limit);
            let p = worst_case_posterior(r, g);
            let (a_lo, a_hi) = posterior_range(r, g, small, n).unwrap();
            let (b_lo, b_hi) = posterior_range(r, g, large, n).unwrap();
            prop_assert!(a_lo <= p + 1e-12 && p <= a_hi + 1e-12);
            prop_assert!(b_lo <= a_lo + 1e-12 && a_hi <= b_hi + 1e-12);
        }
    }
}
