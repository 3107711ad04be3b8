use super::{Attribute, Discretization, Schema, SchemaError};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Where an attribute's raw value lives in a CSV row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeConfig {
    name: String,
    #[serde(default)]
    column: Option<ColumnRef>,
    categories: Vec<String>,
    #[serde(default)]
    bins: Option<Discretization>,
    #[serde(default)]
    other: Option<String>,
    #[serde(default)]
    missing: Option<String>,
}

/// Parsed schema file: the schema itself plus any per-attribute column hints.
#[derive(Debug)]
pub struct SchemaConfig {
    pub schema: Schema,
    pub columns: Vec<(String, ColumnRef)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    attributes: Vec<AttributeConfig>,
}

/// Parses a TOML schema description.
///
/// ```toml
/// name = "toy"
/// [[attributes]]
/// name = "age"
/// column = 0
/// categories = ["young", "old"]
/// bins = { edges = [0, 40], closed = "upper", open_top = true }
/// ```
pub fn load_schema(text: &str) -> Result<SchemaConfig, SchemaError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| SchemaError::Config(e.to_string()))?;
    let mut attributes = Vec::with_capacity(raw.attributes.len());
    let mut columns = Vec::new();
    for a in raw.attributes {
        if a.categories.is_empty() {
            return Err(SchemaError::InvalidAttribute { attribute: a.name, reason: "empty category list".into() });
        }
        let mut attr = Attribute::new(a.name.clone(), a.categories)?;
        if let Some(bins) = a.bins {
            attr = attr.with_bins(bins)?;
        }
        if let Some(other) = &a.other {
            attr = attr.with_other(other)?;
        }
        if let Some(missing) = &a.missing {
            attr = attr.with_missing(missing)?;
        }
        if let Some(col) = a.column {
            columns.push((a.name, col));
        }
        attributes.push(attr);
    }
    let schema = Schema::new(raw.name.unwrap_or_else(|| "schema".into()), attributes)?;
    Ok(SchemaConfig { schema, columns })
}

pub fn load_schema_file(path: impl AsRef<Path>) -> Result<SchemaConfig, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| SchemaError::Io { path: path.display().to_string(), source })?;
    load_schema(&text)
}
