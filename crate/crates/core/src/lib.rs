//! Privacy-preserving mining over categorical data with matrix-based random
//! perturbation.
//!
//! Clients perturb their records through a column-stochastic perturbation
//! matrix whose entry ratios are bounded by an amplification factor `gamma`
//! derived from a `(rho1, rho2)` privacy target. A miner that knows only the
//! matrix (never the per-client randomness) reconstructs the original value
//! distribution, and frequent itemsets, from the perturbed database.
//!
//! The crate provides:
//!
//! * [`schema`]: categorical schemas, discretization, mixed-radix encoding,
//!   CSV ingestion and synthetic data.
//! * [`privacy`]: amplification factors and worst-case posteriors.
//! * [`perturb`]: the gamma-diagonal mechanism (deterministic and randomized),
//!   MASK and cut-and-paste, samplers and condition numbers.
//! * [`reconstruct`]: closed-form and dense reconstruction, subset marginals
//!   and variance diagnostics.
//! * [`mining`]: Apriori with a per-pass support reconstruction phase.
//! * [`metrics`]: support and identity errors.
//! * [`experiment`]: the configuration-driven harness behind the CLI.

pub mod experiment;
pub mod metrics;
pub mod mining;
pub mod perturb;
pub mod privacy;
pub mod reconstruct;
pub mod rng;
pub mod schema;

pub use schema::{Attribute, Dataset, Record, Schema};
