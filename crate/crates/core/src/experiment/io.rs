use super::ExperimentError;
use crate::metrics::AccuracyReport;
use crate::mining::MiningResult;
use crate::perturb::{BooleanDataset, ConditionNumber, Mechanism, PerturbedData};
use crate::schema::{ingest_csv, ColumnMap, Dataset, IngestOptions, RowPolicy, Schema};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// Everything the miner needs to know about a perturbation run. Seeds and
/// per-client draws are never recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMetadata {
    pub mechanism: Mechanism,
    pub schema_name: String,
    pub schema_fingerprint: String,
    pub records: usize,
    pub gamma: Option<f64>,
    pub x: Option<f64>,
    pub condition_number: Option<f64>,
}

impl PerturbationMetadata {
    pub fn new(mechanism: Mechanism, schema: &Schema, records: usize) -> Self {
        let g = mechanism.expected_gamma_diagonal();
        PerturbationMetadata {
            mechanism,
            schema_name: schema.name().to_string(),
            schema_fingerprint: schema.fingerprint(),
            records,
            gamma: g.map(|g| g.gamma()),
            x: g.map(|g| g.x()),
            condition_number: g.map(|g| g.condition_number()),
        }
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<(), ExperimentError> {
        if self.schema_fingerprint != schema.fingerprint() {
            return Err(ExperimentError::Validation(format!(
                "perturbed data was produced under schema `{}` with a different fingerprint",
                self.schema_name
            )));
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| ExperimentError::io(path, e))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ExperimentError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), ExperimentError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| ExperimentError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Category labels under a header of attribute names.
pub fn write_categorical_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let schema = dataset.schema();
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(schema.attributes().iter().map(|a| a.name()))?;
    for r in dataset.records() {
        w.write_record(r.values().iter().enumerate().map(|(j, &v)| schema.attribute(j).categories()[v].as_str()))?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}

/// One 0/1 column per `attribute=category` item.
pub fn write_boolean_csv(data: &BooleanDataset, schema: &Schema, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(item_labels(schema))?;
    for row in data.rows() {
        w.write_record(row.iter().map(|&b| if b { "1" } else { "0" }))?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}

fn item_labels(schema: &Schema) -> Vec<String> {
    (0..schema.len())
        .flat_map(|a| (0..schema.attribute(a).cardinality()).map(move |c| (a, c)))
        .map(|(a, c)| schema.item_label(a, c))
        .collect()
}

pub fn read_boolean_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<BooleanDataset, ExperimentError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != item_labels(schema) {
        return Err(ExperimentError::Validation(format!("{}: header does not match the schema's boolean items", path.display())));
    }
    let mut out = BooleanDataset::new(header.len());
    let mut row = Vec::with_capacity(header.len());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        row.clear();
        for cell in rec.iter() {
            row.push(match cell {
                "1" => true,
                "0" => false,
                other => {
                    return Err(ExperimentError::Validation(format!("{}: row {}: `{other}` is not 0 or 1", path.display(), i + 2)))
                }
            });
        }
        if row.len() != header.len() {
            return Err(ExperimentError::Validation(format!("{}: row {} has {} cells", path.display(), i + 2, row.len())));
        }
        out.push(&row);
    }
    Ok(out)
}

/// Writes the perturbed records and the metadata next to each other.
pub fn write_perturbed(
    data: &PerturbedData,
    metadata: &PerturbationMetadata,
    schema: &Schema,
    data_path: impl AsRef<Path>,
    metadata_path: impl AsRef<Path>,
) -> Result<(), ExperimentError> {
    match data {
        PerturbedData::Categorical(d) => write_categorical_csv(d, data_path)?,
        PerturbedData::Boolean(b) => write_boolean_csv(b, schema, data_path)?,
    }
    write_json(metadata_path, metadata)
}

/// Reads a perturbed file and its metadata, checking both against `schema`.
pub fn read_perturbed(
    data_path: impl AsRef<Path>,
    metadata_path: impl AsRef<Path>,
    schema: Arc<Schema>,
) -> Result<(PerturbedData, PerturbationMetadata), ExperimentError> {
    let metadata: PerturbationMetadata = read_json(metadata_path.as_ref())?;
    metadata.check_schema(&schema)?;
    metadata.mechanism.check_schema(&schema)?;
    let data = if metadata.mechanism.kind().is_boolean() {
        PerturbedData::Boolean(read_boolean_csv(data_path, &schema)?)
    } else {
        let opts = IngestOptions {
            has_header: true,
            comment: None,
            missing_tokens: Vec::new(),
            on_invalid: RowPolicy::Abort,
            ..IngestOptions::default()
        };
        let columns = ColumnMap::by_attribute_name(&schema);
        PerturbedData::Categorical(ingest_csv(data_path, schema, &columns, &opts)?.0)
    };
    if data.len() != metadata.records {
        return Err(ExperimentError::Validation(format!("metadata lists {} records, file has {}", metadata.records, data.len())));
    }
    Ok((data, metadata))
}

/// A mining result tagged with the schema it was mined under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinedFile {
    pub schema_fingerprint: String,
    pub result: MiningResult,
}

/// Writes the result as JSON and its itemsets as CSV; `truth`, when given,
/// adds the original support of every itemset it contains.
pub fn write_mined(
    result: &MiningResult,
    schema: &Schema,
    truth: Option<&MiningResult>,
    json_path: impl AsRef<Path>,
    csv_path: impl AsRef<Path>,
) -> Result<(), ExperimentError> {
    write_json(json_path, &MinedFile { schema_fingerprint: schema.fingerprint(), result: result.clone() })?;
    let mut w = csv_writer(csv_path.as_ref())?;
    w.write_record(["length", "itemset", "estimated_support", "true_support"])?;
    for level in &result.levels {
        for f in &level.itemsets {
            let t = truth.and_then(|t| t.support(&f.itemset)).map(|s| s.to_string()).unwrap_or_default();
            w.write_record([level.length.to_string(), f.itemset.label(schema), f.support.to_string(), t])?;
        }
    }
    w.flush().map_err(|e| ExperimentError::io(csv_path, e))
}

pub fn read_mined(path: impl AsRef<Path>, schema: &Schema) -> Result<MiningResult, ExperimentError> {
    let file: MinedFile = read_json(path.as_ref())?;
    if file.schema_fingerprint != schema.fingerprint() {
        return Err(ExperimentError::Validation(format!("{} was mined under a different schema", path.as_ref().display())));
    }
    Ok(file.result)
}

/// `mechanism,length,metric,value` rows; the overall row has length `all`.
pub fn write_accuracy_csv(reports: &[AccuracyReport], path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["mechanism", "length", "metric", "value"])?;
    for r in reports {
        for (length, metric, value) in r.rows() {
            let length = if length == 0 { "all".to_string() } else { length.to_string() };
            w.write_record([r.mechanism.clone(), length, metric.to_string(), value.to_string()])?;
        }
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}
