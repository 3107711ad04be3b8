//! Categorical schemas and the mixed-radix record index space.
//!
//! A schema is an ordered list of attributes. Attribute order is significant:
//! it fixes the radix order of [`Schema::encode`], so attribute `0` is the
//! fastest-varying digit. Indices are 0-based.

mod config;
mod ingest;
mod synthetic;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub use config::{load_schema, load_schema_file, ColumnRef, SchemaConfig};
pub use ingest::{ingest_csv, ingest_reader, ColumnMap, IngestOptions, IngestSummary, RangePolicy, RowPolicy};
pub use synthetic::{generate_synthetic, DistributionSpec};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("attribute `{attribute}`: {reason}")]
    InvalidAttribute { attribute: String, reason: String },
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("schema has no attributes")]
    Empty,
    #[error("domain size {0} overflows the index space")]
    DomainOverflow(String),
    #[error("schema config: {0}")]
    Config(String),
    #[error("value {value} of attribute `{attribute}` is outside all bins")]
    OutOfDomain { attribute: String, value: f64 },
    #[error("attribute `{attribute}` has no category `{label}`")]
    UnknownCategory { attribute: String, label: String },
    #[error("attribute `{0}` has no discretization rules")]
    NotDiscretized(String),
    #[error("record has {got} values, schema has {expected} attributes")]
    RecordArity { expected: usize, got: usize },
    #[error("value {value} out of range for attribute `{attribute}` ({size} categories)")]
    ValueRange { attribute: String, value: usize, size: usize },
    #[error("index {index} outside domain of size {size}")]
    IndexRange { index: usize, size: usize },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("distribution: {0}")]
    Distribution(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Which end of each bounded interval is included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    /// `(lo, hi]`
    Upper,
    /// `[lo, hi)`
    Lower,
}

/// Numeric binning rules. `edges` are strictly increasing; bounded bins lie
/// between consecutive edges, and `open_top` adds a final bin above the last
/// edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub edges: Vec<f64>,
    pub closed: Closure,
    pub open_top: bool,
}

impl Discretization {
    pub fn bin_count(&self) -> usize {
        self.edges.len().saturating_sub(1) + usize::from(self.open_top)
    }

    /// Bin index of `value`, or `None` if no bin contains it.
    pub fn bin(&self, value: f64) -> Option<usize> {
        if !value.is_finite() {
            return None;
        }
        let first = *self.edges.first()?;
        let last = *self.edges.last()?;
        let below = match self.closed {
            Closure::Upper => value <= first,
            Closure::Lower => value < first,
        };
        if below {
            return None;
        }
        let bounded = self.edges.len() - 1;
        for i in 0..bounded {
            let hi = self.edges[i + 1];
            let inside = match self.closed {
                Closure::Upper => value <= hi,
                Closure::Lower => value < hi,
            };
            if inside {
                return Some(i);
            }
        }
        debug_assert!(value >= last);
        self.open_top.then_some(bounded)
    }

    fn lowest(&self) -> f64 {
        self.edges[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    name: String,
    categories: Vec<String>,
    discretization: Option<Discretization>,
    /// Category that absorbs labels not listed in `categories`.
    other: Option<usize>,
    /// Category assigned to missing cells instead of treating the row as missing.
    missing: Option<usize>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, categories: Vec<String>) -> Result<Self, SchemaError> {
        let attr = Attribute { name: name.into(), categories, discretization: None, other: None, missing: None };
        attr.validate()?;
        Ok(attr)
    }

    pub fn with_bins(mut self, bins: Discretization) -> Result<Self, SchemaError> {
        self.discretization = Some(bins);
        self.validate()?;
        Ok(self)
    }

    pub fn with_other(mut self, label: &str) -> Result<Self, SchemaError> {
        self.other = Some(self.category_index(label)?);
        Ok(self)
    }

    pub fn with_missing(mut self, label: &str) -> Result<Self, SchemaError> {
        self.missing = Some(self.category_index(label)?);
        Ok(self)
    }

    fn invalid(&self, reason: impl Into<String>) -> SchemaError {
        SchemaError::InvalidAttribute { attribute: self.name.clone(), reason: reason.into() }
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.name.trim().is_empty() {
            return Err(self.invalid("empty attribute name"));
        }
        if self.categories.len() < 2 {
            return Err(self.invalid(format!("needs at least 2 categories, has {}", self.categories.len())));
        }
        let mut seen = HashSet::new();
        for c in &self.categories {
            if !seen.insert(c.as_str()) {
                return Err(self.invalid(format!("duplicate category label `{c}`")));
            }
        }
        if let Some(bins) = &self.discretization {
            if bins.edges.is_empty() || (bins.edges.len() == 1 && !bins.open_top) {
                return Err(self.invalid("bins need at least one bounded interval or an open top"));
            }
            if bins.edges.iter().any(|e| !e.is_finite()) {
                return Err(self.invalid("bin edges must be finite"));
            }
            if bins.edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(self.invalid("bin edges must be strictly increasing"));
            }
            if bins.bin_count() != self.categories.len() {
                return Err(self.invalid(format!(
                    "{} bins for {} categories",
                    bins.bin_count(),
                    self.categories.len()
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }

    pub fn discretization(&self) -> Option<&Discretization> {
        self.discretization.as_ref()
    }

    pub fn missing_category(&self) -> Option<usize> {
        self.missing
    }

    pub fn category_index(&self, label: &str) -> Result<usize, SchemaError> {
        self.categories.iter().position(|c| c == label).ok_or_else(|| SchemaError::UnknownCategory {
            attribute: self.name.clone(),
            label: label.to_string(),
        })
    }

    /// Maps a label to its category, falling back to the catch-all category.
    pub fn resolve_label(&self, label: &str) -> Result<usize, SchemaError> {
        match self.category_index(label) {
            Ok(i) => Ok(i),
            Err(e) => self.other.ok_or(e),
        }
    }

    /// Bins a raw number; values outside every interval are an error.
    pub fn discretize(&self, raw: f64) -> Result<usize, SchemaError> {
        let bins = self.discretization.as_ref().ok_or_else(|| SchemaError::NotDiscretized(self.name.clone()))?;
        bins.bin(raw).ok_or(SchemaError::OutOfDomain { attribute: self.name.clone(), value: raw })
    }

    /// Like [`Attribute::discretize`] but values below the first edge land in
    /// the first bin.
    pub fn discretize_clamped(&self, raw: f64) -> Result<usize, SchemaError> {
        let bins = self.discretization.as_ref().ok_or_else(|| SchemaError::NotDiscretized(self.name.clone()))?;
        if raw.is_finite() && raw <= bins.lowest() {
            return Ok(0);
        }
        self.discretize(raw)
    }
}

/// Ordered attributes plus the radix prefix products `n_0 = 1, n_j = n_{j-1} * |S_j|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    name: String,
    attributes: Vec<Attribute>,
    radix: Vec<usize>,
}

impl Schema {
    pub fn new(name: impl Into<String>, attributes: Vec<Attribute>) -> Result<Self, SchemaError> {
        if attributes.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut names = HashSet::new();
        for a in &attributes {
            a.validate()?;
            if !names.insert(a.name.as_str()) {
                return Err(SchemaError::DuplicateAttribute(a.name.clone()));
            }
        }
        let mut radix = Vec::with_capacity(attributes.len() + 1);
        radix.push(1usize);
        for a in &attributes {
            let prev = *radix.last().unwrap();
            let next = prev
                .checked_mul(a.cardinality())
                .ok_or_else(|| SchemaError::DomainOverflow(a.name.clone()))?;
            radix.push(next);
        }
        Ok(Schema { name: name.into(), attributes, radix })
    }

    /// Unlabelled schema with the given cardinalities; category labels are
    /// `"0"`, `"1"`, ... and attribute names `a0`, `a1`, ...
    pub fn from_cardinalities(cards: &[usize]) -> Result<Self, SchemaError> {
        let attrs = cards
            .iter()
            .enumerate()
            .map(|(j, &c)| Attribute::new(format!("a{j}"), (0..c).map(|v| v.to_string()).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Schema::new("anonymous", attrs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, j: usize) -> &Attribute {
        &self.attributes[j]
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// `M`
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.attributes.iter().map(Attribute::cardinality).collect()
    }

    /// `|S_U| = n_M`
    pub fn domain_size(&self) -> usize {
        *self.radix.last().unwrap()
    }

    /// `[n_0, n_1, ..., n_M]`
    pub fn radix_prefix(&self) -> &[usize] {
        &self.radix
    }

    /// Total width of the one-hot boolean expansion, `M_b = sum_j |S_j|`.
    pub fn boolean_width(&self) -> usize {
        self.attributes.iter().map(Attribute::cardinality).sum()
    }

    /// Offset of attribute `j`'s block in the boolean expansion.
    pub fn boolean_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.attributes
            .iter()
            .map(|a| {
                let o = acc;
                acc += a.cardinality();
                o
            })
            .collect()
    }

    pub fn validate(&self, record: &Record) -> Result<(), SchemaError> {
        if record.len() != self.len() {
            return Err(SchemaError::RecordArity { expected: self.len(), got: record.len() });
        }
        for (a, &v) in self.attributes.iter().zip(record.values()) {
            if v >= a.cardinality() {
                return Err(SchemaError::ValueRange { attribute: a.name.clone(), value: v, size: a.cardinality() });
            }
        }
        Ok(())
    }

    /// Mixed-radix index `sum_j v_j * n_{j-1}`. The record must be valid.
    pub fn encode(&self, record: &Record) -> usize {
        debug_assert!(self.validate(record).is_ok());
        record.values().iter().zip(&self.radix).map(|(&v, &n)| v * n).sum()
    }

    pub fn decode(&self, index: usize) -> Result<Record, SchemaError> {
        if index >= self.domain_size() {
            return Err(SchemaError::IndexRange { index, size: self.domain_size() });
        }
        let mut rest = index;
        let values = self
            .attributes
            .iter()
            .map(|a| {
                let v = rest % a.cardinality();
                rest /= a.cardinality();
                v
            })
            .collect();
        Ok(Record(values))
    }

    /// Stable fingerprint of attribute names, categories and bins.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(&(&self.name, &self.attributes)).expect("schema serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Human-readable `attr=category` label of one (attribute, category) pair.
    pub fn item_label(&self, attribute: usize, category: usize) -> String {
        let a = &self.attributes[attribute];
        format!("{}={}", a.name, a.categories[category])
    }
}

/// One categorical record: a category index per attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Record(Vec<usize>);

impl Record {
    pub fn new(values: Vec<usize>) -> Self {
        Record(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for Record {
    fn from(v: Vec<usize>) -> Self {
        Record(v)
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Immutable set of records validated against a shared schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    records: Vec<Record>,
    provenance: String,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, records: Vec<Record>, provenance: impl Into<String>) -> Result<Self, SchemaError> {
        for (i, r) in records.iter().enumerate() {
            schema.validate(r).map_err(|e| SchemaError::Row { row: i, reason: e.to_string() })?;
        }
        Ok(Dataset { schema, records, provenance: provenance.into() })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    /// `N`
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Records encoded into the flat index space.
    pub fn indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| self.schema.encode(r)).collect()
    }

    pub fn concat(mut self, other: Dataset) -> Result<Self, SchemaError> {
        if *self.schema != *other.schema {
            return Err(SchemaError::Config("cannot concatenate datasets with different schemas".into()));
        }
        self.records.extend(other.records);
        self.provenance = format!("{} + {}", self.provenance, other.provenance);
        Ok(self)
    }
}
