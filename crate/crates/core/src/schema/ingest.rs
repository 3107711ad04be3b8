use super::{ColumnRef, Dataset, Record, Schema, SchemaError};
use log::{info, warn};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

/// What to do with a row that cannot be turned into a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RowPolicy {
    #[default]
    Skip,
    Abort,
}

/// Treatment of numeric values below the first bin's lower edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RangePolicy {
    #[default]
    Error,
    ClampToFirst,
}

#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Lines starting with this byte are ignored (the UCI test split opens with `|`).
    pub comment: Option<u8>,
    pub missing_tokens: Vec<String>,
    /// Rows with a missing value in a mapped column.
    pub on_missing: RowPolicy,
    /// Rows that fail to parse or discretize.
    pub on_invalid: RowPolicy,
    pub out_of_range: RangePolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            has_header: false,
            delimiter: b',',
            comment: Some(b'|'),
            missing_tokens: vec!["?".into(), String::new()],
            on_missing: RowPolicy::Skip,
            on_invalid: RowPolicy::Abort,
            out_of_range: RangePolicy::Error,
        }
    }
}

/// Which CSV column feeds each schema attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnMap {
    entries: Vec<(String, ColumnRef)>,
}

impl ColumnMap {
    pub fn new(entries: Vec<(String, ColumnRef)>) -> Self {
        ColumnMap { entries }
    }

    /// Every attribute is read from the header column of the same name.
    pub fn by_attribute_name(schema: &Schema) -> Self {
        ColumnMap {
            entries: schema.attributes().iter().map(|a| (a.name().to_string(), ColumnRef::Name(a.name().to_string()))).collect(),
        }
    }

    /// Parses `attr=col,attr=col` where `col` is a 0-based index or a header name.
    pub fn parse(spec: &str) -> Result<Self, SchemaError> {
        let mut entries = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (attr, col) = part
                .split_once('=')
                .ok_or_else(|| SchemaError::Config(format!("column mapping `{part}` is not attr=column")))?;
            let col = col.trim();
            let col = match col.parse::<usize>() {
                Ok(i) => ColumnRef::Index(i),
                Err(_) => ColumnRef::Name(col.to_string()),
            };
            entries.push((attr.trim().to_string(), col));
        }
        Ok(ColumnMap { entries })
    }

    fn resolve(&self, schema: &Schema, header: Option<&csv::StringRecord>) -> Result<Vec<usize>, SchemaError> {
        schema
            .attributes()
            .iter()
            .map(|a| {
                let (_, col) = self
                    .entries
                    .iter()
                    .find(|(name, _)| name == a.name())
                    .ok_or_else(|| SchemaError::Config(format!("attribute `{}` is not mapped to a column", a.name())))?;
                match col {
                    ColumnRef::Index(i) => Ok(*i),
                    ColumnRef::Name(n) => header
                        .and_then(|h| h.iter().position(|c| c.trim() == n))
                        .ok_or_else(|| SchemaError::Config(format!("column `{n}` for attribute `{}` not found in header", a.name()))),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub records: usize,
    pub skipped_missing: usize,
    pub skipped_invalid: usize,
}

enum CellError {
    Missing,
    Invalid(String),
}

fn parse_cell(schema: &Schema, j: usize, cell: &str, opts: &IngestOptions) -> Result<usize, CellError> {
    let attr = schema.attribute(j);
    let cell = cell.trim();
    if opts.missing_tokens.iter().any(|t| t == cell) {
        return attr.missing_category().ok_or(CellError::Missing);
    }
    if let Ok(i) = attr.category_index(cell) {
        return Ok(i);
    }
    if attr.discretization().is_some() {
        let raw: f64 = cell
            .parse()
            .map_err(|_| CellError::Invalid(format!("`{cell}` is not a number for attribute `{}`", attr.name())))?;
        let binned = match opts.out_of_range {
            RangePolicy::Error => attr.discretize(raw),
            RangePolicy::ClampToFirst => attr.discretize_clamped(raw),
        };
        return binned.map_err(|e| CellError::Invalid(e.to_string()));
    }
    attr.resolve_label(cell).map_err(|e| CellError::Invalid(e.to_string()))
}

/// Reads categorical records from CSV text, discretizing numeric columns.
///
/// A cell that equals one of the attribute's category labels is taken
/// verbatim, so files written by this crate read back unchanged.
pub fn ingest_reader<R: Read>(
    reader: R,
    schema: Arc<Schema>,
    columns: &ColumnMap,
    opts: &IngestOptions,
    provenance: &str,
) -> Result<(Dataset, IngestSummary), SchemaError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .comment(opts.comment)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = if opts.has_header { Some(rdr.headers()?.clone()) } else { None };
    let cols = columns.resolve(&schema, header.as_ref())?;

    let mut summary = IngestSummary::default();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        summary.rows_read += 1;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(summary.rows_read);
        let mut values = Vec::with_capacity(schema.len());
        let mut failure = None;
        for (j, &c) in cols.iter().enumerate() {
            let Some(cell) = row.get(c) else {
                failure = Some(CellError::Invalid(format!("row has no column {c}")));
                break;
            };
            match parse_cell(&schema, j, cell, opts) {
                Ok(v) => values.push(v),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        match failure {
            None => records.push(Record::new(values)),
            Some(CellError::Missing) => match opts.on_missing {
                RowPolicy::Skip => summary.skipped_missing += 1,
                RowPolicy::Abort => return Err(SchemaError::Row { row: line, reason: "missing value".into() }),
            },
            Some(CellError::Invalid(reason)) => match opts.on_invalid {
                RowPolicy::Skip => {
                    warn!("{provenance}: skipping row {line}: {reason}");
                    summary.skipped_invalid += 1
                }
                RowPolicy::Abort => return Err(SchemaError::Row { row: line, reason }),
            },
        }
    }
    summary.records = records.len();
    if summary.skipped_missing > 0 {
        info!("{provenance}: skipped {} rows with missing values", summary.skipped_missing);
    }
    let dataset = Dataset::new(schema, records, provenance)?;
    Ok((dataset, summary))
}

pub fn ingest_csv(
    path: impl AsRef<Path>,
    schema: Arc<Schema>,
    columns: &ColumnMap,
    opts: &IngestOptions,
) -> Result<(Dataset, IngestSummary), SchemaError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| SchemaError::Io { path: path.display().to_string(), source })?;
    ingest_reader(std::io::BufReader::new(file), schema, columns, opts, &path.display().to_string())
}
