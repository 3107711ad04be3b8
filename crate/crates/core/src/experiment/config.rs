use super::ExperimentError;
use crate::perturb::{CutPasteSpec, GammaDiagonal, MaskSpec, Mechanism, MechanismKind, RandomizedGamma};
use crate::privacy::{gamma_for, PrivacyTarget};
use crate::schema::{DistributionSpec, Schema};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Where the original records come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        paths: Vec<PathBuf>,
        #[serde(default)]
        header: bool,
        /// `attr=col,...`; defaults to the schema file's columns, or to
        /// header names when the file has a header.
        #[serde(default)]
        columns: Option<String>,
        /// Abort on rows with missing values instead of skipping them.
        #[serde(default)]
        abort_on_missing: bool,
        /// Map values below the first bin into it instead of rejecting them.
        #[serde(default)]
        clamp: bool,
    },
    Synthetic {
        records: usize,
        distribution: DistributionSpec,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    #[serde(default = "default_rho1")]
    pub rho1: f64,
    #[serde(default = "default_rho2")]
    pub rho2: f64,
    /// Overrides the amplification derived from `(rho1, rho2)`.
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn default_rho1() -> f64 {
    0.05
}

fn default_rho2() -> f64 {
    0.5
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        PrivacyConfig { rho1: default_rho1(), rho2: default_rho2(), gamma: None }
    }
}

impl PrivacyConfig {
    pub fn gamma(&self) -> Result<f64, ExperimentError> {
        match self.gamma {
            Some(g) if g > 1.0 && g.is_finite() => Ok(g),
            Some(g) => Err(ExperimentError::Validation(format!("gamma must be finite and > 1, got {g}"))),
            None => Ok(gamma_for(PrivacyTarget::new(self.rho1, self.rho2)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    /// RAN-GD half-width as a fraction of the diagonal entry.
    #[serde(default)]
    pub alpha_fraction: Option<f64>,
    /// MASK retention probability; derived from gamma when absent.
    #[serde(default)]
    pub mask_p: Option<f64>,
    #[serde(default)]
    pub cp_cut: Option<usize>,
    #[serde(default)]
    pub cp_rho: Option<f64>,
    /// RAN-GD alpha fractions to sweep in addition to the main run.
    #[serde(default)]
    pub alpha_sweep: Vec<f64>,
    /// Itemset length whose support error the sweep reports.
    #[serde(default = "default_sweep_length")]
    pub sweep_length: usize,
}

fn default_sweep_length() -> usize {
    4
}

pub const DEFAULT_ALPHA_FRACTION: f64 = 0.5;
pub const DEFAULT_CP_CUT: usize = 3;
pub const DEFAULT_CP_RHO: f64 = 0.494;

impl MechanismConfig {
    pub fn new(kind: MechanismKind) -> Self {
        MechanismConfig {
            kind,
            alpha_fraction: None,
            mask_p: None,
            cp_cut: None,
            cp_rho: None,
            alpha_sweep: Vec::new(),
            sweep_length: default_sweep_length(),
        }
    }

    /// Instantiates the mechanism for `schema` under amplification `gamma`.
    pub fn build(&self, schema: &Schema, gamma: f64) -> Result<Mechanism, ExperimentError> {
        self.build_with_alpha(schema, gamma, self.alpha_fraction.unwrap_or(DEFAULT_ALPHA_FRACTION))
    }

    pub fn build_with_alpha(&self, schema: &Schema, gamma: f64, alpha_fraction: f64) -> Result<Mechanism, ExperimentError> {
        let base = || GammaDiagonal::new(gamma, schema.domain_size());
        Ok(match self.kind {
            MechanismKind::DetGd => Mechanism::DetGd(base()?),
            MechanismKind::RanGd => Mechanism::RanGd(RandomizedGamma::from_fraction(base()?, alpha_fraction)?),
            MechanismKind::Mask => Mechanism::Mask(match self.mask_p {
                Some(p) => MaskSpec::new(p)?,
                None => MaskSpec::for_gamma(gamma, schema.len())?,
            }),
            MechanismKind::CutPaste => Mechanism::CutPaste(CutPasteSpec::new(
                self.cp_cut.unwrap_or(DEFAULT_CP_CUT),
                self.cp_rho.unwrap_or(DEFAULT_CP_RHO),
                schema.len(),
                schema.boolean_width(),
            )?),
        })
    }
}

/// One experiment: a dataset, a mechanism and the mining threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub schema: PathBuf,
    pub dataset: DatasetSource,
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
    pub sup_min: f64,
    pub seed: u64,
    /// Seeds `seed, seed + 1, ...` are run and averaged.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub max_subset_cells: Option<usize>,
}

fn default_repeats() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ExperimentError::Validation(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.schema);
        if let DatasetSource::Csv { paths, .. } = &mut self.dataset {
            paths.iter_mut().for_each(fix);
        }
        if let Some(out) = &mut self.out {
            fix(out);
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.sup_min > 0.0 && self.sup_min.is_finite()) {
            return Err(ExperimentError::Validation(format!("sup_min must be positive, got {}", self.sup_min)));
        }
        if self.repeats == 0 {
            return Err(ExperimentError::Validation("repeats must be at least 1".into()));
        }
        self.privacy.gamma()?;
        if let DatasetSource::Csv { paths, .. } = &self.dataset {
            if paths.is_empty() {
                return Err(ExperimentError::Validation("CSV dataset lists no paths".into()));
            }
        }
        let m = &self.mechanism;
        if m.kind != MechanismKind::RanGd && (m.alpha_fraction.is_some() || !m.alpha_sweep.is_empty()) {
            return Err(ExperimentError::Validation(format!("alpha settings apply only to RAN-GD, not {}", m.kind)));
        }
        if m.kind != MechanismKind::Mask && m.mask_p.is_some() {
            return Err(ExperimentError::Validation(format!("mask_p applies only to MASK, not {}", m.kind)));
        }
        if m.kind != MechanismKind::CutPaste && (m.cp_cut.is_some() || m.cp_rho.is_some()) {
            return Err(ExperimentError::Validation(format!("cut-and-paste settings do not apply to {}", m.kind)));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.mechanism.kind.label().to_string())
    }
}
