//! Perturbation mechanisms.
//!
//! Every mechanism is a column-stochastic matrix `A` with `A[v][u] = P(u -> v)`.
//! The gamma-diagonal family is sampled attribute by attribute without ever
//! materializing `A`; MASK and cut-and-paste operate on the one-hot boolean
//! expansion of a record.

mod boolean;
mod cut_paste;
mod gamma;
mod mask;
mod matrix;
mod mechanism;

pub use boolean::{mask_collapse, mask_expand, BooleanDataset};
pub use cut_paste::CutPasteSpec;
pub use gamma::{perturb_chain, ChainSampler, ClientParams, GammaDiagonal, RandomizedGamma};
pub use mask::{mask_condition_number, mask_matrix, mask_p_for_gamma, mask_perturb, MaskSpec, MAX_MASK_WIDTH};
pub use matrix::{condition_number, perturb_generic, sample_column, ConditionNumber, MaterializedMatrix};
pub use mechanism::{perturb_dataset, Mechanism, MechanismKind, PerturbedData};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("negative transition probability {value} at ({row}, {col})")]
    NegativeProbability { row: usize, col: usize, value: f64 },
    #[error("matrix of {rows}x{cols} is too large to materialize")]
    TooLarge { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}
