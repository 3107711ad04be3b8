use super::config::{DatasetSource, ExperimentConfig, MechanismConfig};
use super::io::{write_json, MinedFile};
use super::ExperimentError;
use crate::metrics::{evaluate, AccuracyReport, LengthAccuracy};
use crate::mining::{apriori_plain, apriori_reconstructed, MiningOptions, MiningResult, PassDiagnostics};
use crate::perturb::{mask_condition_number, perturb_dataset, ConditionNumber, Mechanism, MechanismKind};
use crate::privacy::PosteriorAnalysis;
use crate::schema::{generate_synthetic, ingest_csv, load_schema_file, ColumnMap, Dataset, IngestOptions, RangePolicy, RowPolicy, Schema};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads the schema and the original records a config points at.
pub fn load_dataset(config: &ExperimentConfig) -> Result<(Arc<Schema>, Dataset), ExperimentError> {
    load_source(&config.schema, &config.dataset, config.seed)
}

/// Loads a schema file and the records of `source`; `seed` drives synthetic
/// sources that carry no seed of their own.
pub fn load_source(schema_path: &Path, source: &DatasetSource, seed: u64) -> Result<(Arc<Schema>, Dataset), ExperimentError> {
    let schema_cfg = load_schema_file(schema_path)?;
    let schema = Arc::new(schema_cfg.schema);
    let dataset = match source {
        DatasetSource::Csv { paths, header, columns, abort_on_missing, clamp } => {
            let map = match columns {
                Some(spec) => ColumnMap::parse(spec)?,
                None if !schema_cfg.columns.is_empty() => ColumnMap::new(schema_cfg.columns.clone()),
                None => ColumnMap::by_attribute_name(&schema),
            };
            let opts = IngestOptions {
                has_header: *header,
                on_missing: if *abort_on_missing { RowPolicy::Abort } else { RowPolicy::Skip },
                out_of_range: if *clamp { RangePolicy::ClampToFirst } else { RangePolicy::Error },
                ..IngestOptions::default()
            };
            let mut combined: Option<Dataset> = None;
            for path in paths {
                let (d, summary) = ingest_csv(path, schema.clone(), &map, &opts)?;
                info!("{}: {} records from {} rows", path.display(), summary.records, summary.rows_read);
                combined = Some(match combined {
                    None => d,
                    Some(c) => c.concat(d)?,
                });
            }
            combined.ok_or_else(|| ExperimentError::Validation("no input files".into()))?
        }
        DatasetSource::Synthetic { records, distribution, seed: own_seed } => {
            generate_synthetic(schema.clone(), *records, distribution, own_seed.unwrap_or(seed))?
        }
    };
    Ok((schema, dataset))
}

/// Condition number of the reconstruction system for itemset lengths `1..=max_length`.
pub fn condition_numbers(mechanism: &Mechanism, max_length: usize) -> Result<Vec<f64>, ExperimentError> {
    (1..=max_length)
        .map(|k| {
            Ok(match mechanism {
                Mechanism::DetGd(g) => g.condition_number(),
                Mechanism::RanGd(r) => r.base().condition_number(),
                Mechanism::Mask(m) => mask_condition_number(k, m.p()),
                Mechanism::CutPaste(c) => c.class_matrix(k)?.condition_number(),
            })
        })
        .collect()
}

/// Worst-case posterior for a property of prior `rho1` under `mechanism`,
/// from the mechanism's own extreme entries.
pub fn posterior_for(mechanism: &Mechanism, rho1: f64, schema: &Schema) -> Result<PosteriorAnalysis, ExperimentError> {
    Ok(match mechanism {
        Mechanism::DetGd(g) => g.posterior_analysis(rho1),
        Mechanism::RanGd(r) => r.posterior_analysis(rho1)?,
        Mechanism::Mask(m) => {
            // two valid records differ in at most 2M of the M_b bits
            let width = schema.boolean_width();
            let agree = width - 2 * schema.len();
            PosteriorAnalysis::from_entries(rho1, m.entry(width, width), m.entry(agree, width))
        }
        Mechanism::CutPaste(c) => {
            let (maxp, minp) = c.extremal_entries();
            PosteriorAnalysis::from_entries(rho1, maxp, minp)
        }
    })
}

/// Result of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub found: Vec<usize>,
    pub accuracy: AccuracyReport,
    pub passes: Vec<PassDiagnostics>,
}

/// Metrics of one itemset length averaged over the seeds where they are defined.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    /// `0` for the overall row.
    pub length: usize,
    pub truth: usize,
    pub mean_found: f64,
    pub rho: Option<f64>,
    pub rho_over_truth: Option<f64>,
    pub sigma_plus: Option<f64>,
    pub sigma_minus: Option<f64>,
    /// Seeds contributing to `rho` (those with a non-empty `F & R`).
    pub rho_runs: usize,
    pub condition_number: Option<f64>,
    pub singular_runs: usize,
    pub negative_estimates: f64,
    pub min_estimate: Option<f64>,
    pub max_estimate: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        (None, 0)
    } else {
        (Some(v.iter().sum::<f64>() / v.len() as f64), v.len())
    }
}

fn summarize(runs: &[RunReport], length: usize, truth: usize, cond: Option<f64>) -> LengthSummary {
    let pick = |r: &RunReport| -> Option<LengthAccuracy> {
        if length == 0 {
            Some(r.accuracy.overall.clone())
        } else {
            r.accuracy.length(length).cloned()
        }
    };
    let accs: Vec<Option<LengthAccuracy>> = runs.iter().map(pick).collect();
    let (rho, rho_runs) = mean(accs.iter().map(|a| a.as_ref().and_then(|a| a.support_error_pct)));
    let passes: Vec<&PassDiagnostics> = if length == 0 {
        Vec::new()
    } else {
        runs.iter().filter_map(|r| r.passes.get(length - 1)).collect()
    };
    let found = |r: &RunReport| if length == 0 { r.found.iter().sum() } else { r.found.get(length - 1).copied().unwrap_or(0) };
    LengthSummary {
        length,
        truth,
        mean_found: runs.iter().map(found).sum::<usize>() as f64 / runs.len() as f64,
        rho,
        rho_over_truth: mean(accs.iter().map(|a| a.as_ref().and_then(|a| a.support_error_over_truth_pct))).0,
        sigma_plus: mean(accs.iter().map(|a| a.as_ref().and_then(|a| a.false_positive_pct))).0,
        sigma_minus: mean(accs.iter().map(|a| a.as_ref().and_then(|a| a.false_negative_pct))).0,
        rho_runs,
        condition_number: cond,
        singular_runs: passes.iter().filter(|p| p.singular).count(),
        negative_estimates: if passes.is_empty() {
            0.0
        } else {
            passes.iter().map(|p| p.negative_estimates as f64).sum::<f64>() / passes.len() as f64
        },
        min_estimate: passes.iter().filter_map(|p| p.min_estimate).reduce(f64::min),
        max_estimate: passes.iter().filter_map(|p| p.max_estimate).reduce(f64::max),
    }
}

/// One point of an alpha sweep for the randomized mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha_fraction: f64,
    pub length: usize,
    pub rho: Option<f64>,
    pub sigma_plus: Option<f64>,
    pub sigma_minus: Option<f64>,
    pub posterior_low: f64,
    pub posterior_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub mechanism: Mechanism,
    pub config_hash: String,
    pub schema_fingerprint: String,
    pub records: usize,
    pub sup_min: f64,
    pub gamma: f64,
    pub seeds: Vec<u64>,
    pub truth_counts: Vec<usize>,
    pub runs: Vec<RunReport>,
    pub lengths: Vec<LengthSummary>,
    pub overall: LengthSummary,
    pub condition_numbers: Vec<f64>,
    pub posterior: PosteriorAnalysis,
    pub alpha_sweep: Vec<SweepPoint>,
    /// Wall-clock time; excluded from [`ExperimentReport::content_hash`].
    pub runtime_ms: u64,
}

impl ExperimentReport {
    /// SHA-256 of the report without its runtime: equal for equal configs and seeds.
    pub fn content_hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.runtime_ms = 0;
        sha256_hex(&serde_json::to_vec(&stripped).expect("report serializes"))
    }

    pub fn length(&self, k: usize) -> Option<&LengthSummary> {
        self.lengths.iter().find(|l| l.length == k)
    }
}

fn mine_once(
    dataset: &Dataset,
    truth: &MiningResult,
    mechanism: &Mechanism,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(RunReport, MiningResult), ExperimentError> {
    let options = MiningOptions { max_subset_cells: config.max_subset_cells.unwrap_or(MiningOptions::default().max_subset_cells), max_length: None };
    let perturbed = perturb_dataset(dataset, mechanism, seed)?;
    let mined = apriori_reconstructed(&perturbed, dataset.schema(), mechanism, config.sup_min, &options)?;
    let accuracy = evaluate(&mined, truth)?;
    let report = RunReport {
        seed,
        found: mined.counts(dataset.schema().len()),
        accuracy,
        passes: mined.levels.iter().map(|l| l.diagnostics.clone()).collect(),
    };
    Ok((report, mined))
}

/// Runs every seed of `config` and, for RAN-GD, its alpha sweep. When the
/// config names an output directory, the truth, the mined results and the
/// report are written there.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let start = Instant::now();
    let (schema, dataset) = load_dataset(config)?;
    let truth = apriori_plain(&dataset, config.sup_min)?;
    run_on(config, &schema, &dataset, &truth, start)
}

fn run_on(
    config: &ExperimentConfig,
    schema: &Arc<Schema>,
    dataset: &Dataset,
    truth: &MiningResult,
    start: Instant,
) -> Result<ExperimentReport, ExperimentError> {
    let gamma = config.privacy.gamma()?;
    let mechanism = config.mechanism.build(schema, gamma)?;
    let m = schema.len();
    let mut runs = Vec::new();
    let mut mined_results = Vec::new();
    for seed in config.seeds() {
        let (run, mined) = mine_once(dataset, truth, &mechanism, config, seed)?;
        info!("{} seed {seed}: found {:?}", mechanism.kind(), run.found);
        runs.push(run);
        mined_results.push(mined);
    }
    let conds = condition_numbers(&mechanism, m)?;
    let truth_counts = truth.counts(m);
    let lengths = (1..=m).map(|k| summarize(&runs, k, truth_counts[k - 1], Some(conds[k - 1]))).collect();
    let overall = summarize(&runs, 0, truth.total(), None);
    let alpha_sweep = sweep(config, schema, dataset, truth, gamma)?;
    let report = ExperimentReport {
        label: config.label(),
        mechanism,
        config_hash: sha256_hex(&serde_json::to_vec(config)?),
        schema_fingerprint: schema.fingerprint(),
        records: dataset.len(),
        sup_min: config.sup_min,
        gamma,
        seeds: config.seeds(),
        truth_counts,
        runs,
        lengths,
        overall,
        condition_numbers: conds,
        posterior: posterior_for(&mechanism, config.privacy.rho1, schema)?,
        alpha_sweep,
        runtime_ms: start.elapsed().as_millis() as u64,
    };
    if let Some(out) = &config.out {
        write_run_outputs(out, &report, schema, truth, &mined_results)?;
    }
    Ok(report)
}

fn sweep(
    config: &ExperimentConfig,
    schema: &Schema,
    dataset: &Dataset,
    truth: &MiningResult,
    gamma: f64,
) -> Result<Vec<SweepPoint>, ExperimentError> {
    let mc: &MechanismConfig = &config.mechanism;
    if mc.kind != MechanismKind::RanGd {
        return Ok(Vec::new());
    }
    let length = mc.sweep_length;
    let mut out = Vec::new();
    for &fraction in &mc.alpha_sweep {
        let mechanism = mc.build_with_alpha(schema, gamma, fraction)?;
        let mut accs = Vec::new();
        for seed in config.seeds() {
            accs.push(mine_once(dataset, truth, &mechanism, config, seed)?.0.accuracy);
        }
        let at = |f: fn(&LengthAccuracy) -> Option<f64>| mean(accs.iter().map(|a| a.length(length).and_then(f))).0;
        let (low, high) = crate::privacy::posterior_range(config.privacy.rho1, gamma, fraction, schema.domain_size())?;
        out.push(SweepPoint {
            alpha_fraction: fraction,
            length,
            rho: at(|l| l.support_error_pct),
            sigma_plus: at(|l| l.false_positive_pct),
            sigma_minus: at(|l| l.false_negative_pct),
            posterior_low: low,
            posterior_high: high,
        });
    }
    Ok(out)
}

fn write_run_outputs(
    out: &Path,
    report: &ExperimentReport,
    schema: &Schema,
    truth: &MiningResult,
    mined: &[MiningResult],
) -> Result<(), ExperimentError> {
    write_json(out.join("truth.json"), &MinedFile { schema_fingerprint: schema.fingerprint(), result: truth.clone() })?;
    for (run, result) in report.runs.iter().zip(mined) {
        super::io::write_mined(
            result,
            schema,
            Some(truth),
            out.join(format!("mined_seed{}.json", run.seed)),
            out.join(format!("itemsets_seed{}.csv", run.seed)),
        )?;
    }
    super::io::write_accuracy_csv(&report.runs.iter().map(|r| r.accuracy.clone()).collect::<Vec<_>>(), out.join("accuracy.csv"))?;
    write_json(out.join("report.json"), report)
}

/// Comparison tables across several experiment reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareTables {
    /// `(mechanism, length, metric, value)`; values are seed means.
    pub errors: Vec<(String, usize, String, f64)>,
    /// `(mechanism, length, condition number)`
    pub condition_numbers: Vec<(String, usize, f64)>,
    pub alpha_sweep: Vec<(String, SweepPoint)>,
    pub summary: Vec<CompareSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub label: String,
    pub mechanism: MechanismKind,
    pub content_hash: String,
    pub seeds: Vec<u64>,
    pub records: usize,
    pub truth_counts: Vec<usize>,
    pub mean_found: Vec<f64>,
    pub posterior: PosteriorAnalysis,
    pub overall: LengthSummary,
}

/// Lines up reports that share a schema and minimum support.
pub fn compare(reports: &[ExperimentReport]) -> Result<CompareTables, ExperimentError> {
    let first = reports.first().ok_or_else(|| ExperimentError::Validation("nothing to compare".into()))?;
    for r in reports {
        if r.schema_fingerprint != first.schema_fingerprint {
            return Err(ExperimentError::Validation(format!("`{}` uses a different schema than `{}`", r.label, first.label)));
        }
        if r.sup_min != first.sup_min {
            return Err(ExperimentError::Validation(format!("`{}` mines at sup_min {} but `{}` at {}", r.label, r.sup_min, first.label, first.sup_min)));
        }
    }
    let mut errors = Vec::new();
    let mut condition_numbers = Vec::new();
    let mut alpha_sweep = Vec::new();
    let mut summary = Vec::new();
    for r in reports {
        for l in &r.lengths {
            for (name, v) in [
                ("rho", l.rho),
                ("rho_F", l.rho_over_truth),
                ("sigma_plus", l.sigma_plus),
                ("sigma_minus", l.sigma_minus),
            ] {
                if let Some(v) = v {
                    errors.push((r.label.clone(), l.length, name.to_string(), v));
                }
            }
            errors.push((r.label.clone(), l.length, "found".to_string(), l.mean_found));
        }
        for (k, c) in r.condition_numbers.iter().enumerate() {
            condition_numbers.push((r.label.clone(), k + 1, *c));
        }
        for p in &r.alpha_sweep {
            alpha_sweep.push((r.label.clone(), p.clone()));
        }
        summary.push(CompareSummary {
            label: r.label.clone(),
            mechanism: r.mechanism.kind(),
            content_hash: r.content_hash(),
            seeds: r.seeds.clone(),
            records: r.records,
            truth_counts: r.truth_counts.clone(),
            mean_found: r.lengths.iter().map(|l| l.mean_found).collect(),
            posterior: r.posterior.clone(),
            overall: r.overall.clone(),
        });
    }
    Ok(CompareTables { errors, condition_numbers, alpha_sweep, summary })
}

impl CompareTables {
    /// Writes `errors.csv`, `condition_numbers.csv`, `alpha_sweep.csv` and `summary.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("errors.csv"))?;
        w.write_record(["mechanism", "length", "metric", "value"])?;
        for (m, k, metric, v) in &self.errors {
            w.write_record([m.clone(), k.to_string(), metric.clone(), v.to_string()])?;
        }
        w.flush().map_err(|e| ExperimentError::io(dir.join("errors.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("condition_numbers.csv"))?;
        w.write_record(["mechanism", "length", "condition_number"])?;
        for (m, k, c) in &self.condition_numbers {
            w.write_record([m.clone(), k.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| ExperimentError::io(dir.join("condition_numbers.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("alpha_sweep.csv"))?;
        w.write_record(["mechanism", "alpha_fraction", "length", "rho", "sigma_plus", "sigma_minus", "posterior_low", "posterior_high"])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for (m, p) in &self.alpha_sweep {
            w.write_record([
                m.clone(),
                p.alpha_fraction.to_string(),
                p.length.to_string(),
                opt(p.rho),
                opt(p.sigma_plus),
                opt(p.sigma_minus),
                p.posterior_low.to_string(),
                p.posterior_high.to_string(),
            ])?;
        }
        w.flush().map_err(|e| ExperimentError::io(dir.join("alpha_sweep.csv"), e))?;
        write_json(dir.join("summary.json"), &self.summary)
    }
}
