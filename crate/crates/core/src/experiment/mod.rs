//! Configuration-driven experiment harness.
//!
//! A run loads a dataset, perturbs it with one mechanism under several seeds,
//! mines each perturbed copy with per-pass reconstruction and scores the
//! result against mining the original data. [`compare`] lines up several runs
//! into the per-length tables behind the usual accuracy and condition-number
//! plots.

mod config;
mod io;
mod run;

pub use config::{DatasetSource, ExperimentConfig, MechanismConfig, PrivacyConfig};
pub use io::{
    read_boolean_csv, read_mined, read_perturbed, write_accuracy_csv, write_boolean_csv, write_categorical_csv, write_json,
    write_mined, write_perturbed, MinedFile, PerturbationMetadata,
};
pub use run::{
    compare, condition_numbers, load_dataset, load_source, posterior_for, run_experiment, CompareSummary, CompareTables, ExperimentReport, LengthSummary,
    RunReport, SweepPoint,
};

use crate::metrics::MetricsError;
use crate::mining::MiningError;
use crate::perturb::PerturbError;
use crate::privacy::PrivacyError;
use crate::reconstruct::ReconstructError;
use crate::schema::SchemaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        ExperimentError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 1 for invalid input, 2 for I/O failures, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Io { .. } | ExperimentError::Csv(_) => 2,
            ExperimentError::Schema(SchemaError::Io { .. } | SchemaError::Csv(_)) => 2,
            ExperimentError::Numerical(_) => 3,
            ExperimentError::Perturb(PerturbError::Singular | PerturbError::TooLarge { .. }) => 3,
            ExperimentError::Reconstruct(ReconstructError::Mass { .. } | ReconstructError::Perturb(PerturbError::Singular)) => 3,
            ExperimentError::Mining(
                MiningError::SubsetTooLarge { .. }
                | MiningError::Perturb(PerturbError::Singular)
                | MiningError::Reconstruct(ReconstructError::Mass { .. }),
            ) => 3,
            _ => 1,
        }
    }
}
