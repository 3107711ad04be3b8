use clap::{Args, Parser, Subcommand};
use frapp::experiment::{
    compare, load_source, read_mined, read_perturbed, run_experiment, write_accuracy_csv, write_json, write_mined,
    write_perturbed, DatasetSource, ExperimentConfig, ExperimentError, MechanismConfig, PerturbationMetadata,
    PrivacyConfig,
};
use frapp::metrics::evaluate;
use frapp::mining::{apriori_plain, apriori_reconstructed, MiningOptions};
use frapp::perturb::{perturb_dataset, MechanismKind};
use frapp::privacy::{gamma_for, posterior_range, worst_case_posterior, PrivacyTarget};
use frapp::schema::{load_schema_file, DistributionSpec};
use log::info;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "frapp", version, about = "Privacy-bounded perturbation and frequent itemset mining")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Amplification and worst-case posteriors for a privacy target.
    Privacy(PrivacyArgs),
    /// Perturb a dataset client-side; writes the perturbed CSV and its metadata.
    Perturb(PerturbArgs),
    /// Mine frequent itemsets from a perturbed file, or from original data without --metadata.
    Mine(MineArgs),
    /// Compare a mined result against the ground truth.
    Evaluate(EvaluateArgs),
    /// Run experiment configs and emit the combined comparison tables.
    Compare(CompareArgs),
    /// Run one experiment config end to end.
    Run(RunArgs),
}

#[derive(Args)]
struct PrivacyFlags {
    #[arg(long, default_value_t = 0.05)]
    rho1: f64,
    #[arg(long, default_value_t = 0.5)]
    rho2: f64,
    /// Amplification override; takes precedence over --rho2.
    #[arg(long)]
    gamma: Option<f64>,
}

impl PrivacyFlags {
    fn config(&self) -> PrivacyConfig {
        PrivacyConfig { rho1: self.rho1, rho2: self.rho2, gamma: self.gamma }
    }
}

#[derive(Args)]
struct PrivacyArgs {
    #[command(flatten)]
    privacy: PrivacyFlags,
    /// RAN-GD half-width as a fraction of the diagonal entry.
    #[arg(long)]
    alpha_frac: Option<f64>,
    /// Domain size for the posterior range; taken from --schema when absent.
    #[arg(long)]
    domain_size: Option<usize>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct InputFlags {
    #[arg(long)]
    schema: PathBuf,
    /// Input CSV; repeat to concatenate several files.
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Generate this many uniform synthetic records instead of reading --input.
    #[arg(long, conflicts_with = "input")]
    synthetic: Option<usize>,
    /// The input files start with a header row.
    #[arg(long)]
    header: bool,
    /// Column mapping `attr=col,...`; defaults to the schema's columns.
    #[arg(long)]
    columns: Option<String>,
}

impl InputFlags {
    fn source(&self) -> Result<DatasetSource, ExperimentError> {
        match self.synthetic {
            Some(records) => Ok(DatasetSource::Synthetic { records, distribution: DistributionSpec::Uniform, seed: None }),
            None if self.input.is_empty() => Err(ExperimentError::Validation("give --input or --synthetic".into())),
            None => Ok(DatasetSource::Csv {
                paths: self.input.clone(),
                header: self.header,
                columns: self.columns.clone(),
                abort_on_missing: false,
                clamp: false,
            }),
        }
    }
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    input: InputFlags,
    #[arg(long)]
    mechanism: MechanismKind,
    #[command(flatten)]
    privacy: PrivacyFlags,
    #[arg(long)]
    alpha_frac: Option<f64>,
    /// MASK retention probability; derived from gamma when absent.
    #[arg(long)]
    mask_p: Option<f64>,
    #[arg(long)]
    cp_k: Option<usize>,
    #[arg(long)]
    cp_rho: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Output directory for `perturbed.csv` and `metadata.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Metadata written by `perturb`; without it the input is mined as original data.
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    sup_min: f64,
    /// Seed for --synthetic input.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest itemset length to mine.
    #[arg(long)]
    max_length: Option<usize>,
    /// Output directory for `mined.json` and `itemsets.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    schema: PathBuf,
    /// `mined.json` of the reconstructed mining run.
    #[arg(long)]
    result: PathBuf,
    /// `mined.json` of the run on the original data.
    #[arg(long)]
    truth: PathBuf,
    /// Output directory for `accuracy.json` and `accuracy.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment config (TOML); repeat once per mechanism.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Privacy(a) => cmd_privacy(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Mine(a) => cmd_mine(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Run(a) => cmd_run(a),
    }
}

fn create_dir(dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))
}

fn cmd_privacy(a: PrivacyArgs) -> Result<(), ExperimentError> {
    let target = PrivacyTarget::new(a.privacy.rho1, a.privacy.rho2)?;
    let gamma = match a.privacy.gamma {
        Some(_) => a.privacy.config().gamma()?,
        None => gamma_for(target),
    };
    println!("gamma = {gamma}");
    println!("worst_case_posterior = {}", worst_case_posterior(target.rho1(), gamma));
    if let Some(fraction) = a.alpha_frac {
        let n = match (a.domain_size, &a.schema) {
            (Some(n), _) => n,
            (None, Some(path)) => load_schema_file(path)?.schema.domain_size(),
            (None, None) => return Err(ExperimentError::Validation("--alpha-frac needs --domain-size or --schema".into())),
        };
        let (low, high) = posterior_range(target.rho1(), gamma, fraction, n)?;
        println!("posterior_range = [{low}, {high}]");
    }
    Ok(())
}

fn cmd_perturb(a: PerturbArgs) -> Result<(), ExperimentError> {
    let (schema, dataset) = load_source(&a.input.schema, &a.input.source()?, a.seed)?;
    let mechanism_config = MechanismConfig {
        alpha_fraction: a.alpha_frac,
        mask_p: a.mask_p,
        cp_cut: a.cp_k,
        cp_rho: a.cp_rho,
        ..MechanismConfig::new(a.mechanism)
    };
    let mechanism = mechanism_config.build(&schema, a.privacy.config().gamma()?)?;
    mechanism.check_schema(&schema)?;
    let perturbed = perturb_dataset(&dataset, &mechanism, a.seed)?;
    info!("perturbed {} records with {}", dataset.len(), mechanism.kind());
    let metadata = PerturbationMetadata::new(mechanism, &schema, dataset.len());
    create_dir(&a.out)?;
    write_perturbed(&perturbed, &metadata, &schema, a.out.join("perturbed.csv"), a.out.join("metadata.json"))
}

fn cmd_mine(a: MineArgs) -> Result<(), ExperimentError> {
    let options = MiningOptions { max_length: a.max_length, ..MiningOptions::default() };
    let (schema, result) = match &a.metadata {
        Some(meta) => {
            let input = match a.input.input.as_slice() {
                [one] => one,
                _ => return Err(ExperimentError::Validation("mining perturbed data takes exactly one --input".into())),
            };
            let schema = Arc::new(load_schema_file(&a.input.schema)?.schema);
            let (perturbed, metadata) = read_perturbed(input, meta, schema.clone())?;
            let result = apriori_reconstructed(&perturbed, &schema, &metadata.mechanism, a.sup_min, &options)?;
            (schema, result)
        }
        None => {
            let (schema, dataset) = load_source(&a.input.schema, &a.input.source()?, a.seed)?;
            let mut result = apriori_plain(&dataset, a.sup_min)?;
            if let Some(k) = a.max_length {
                result.levels.truncate(k);
            }
            (schema, result)
        }
    };
    info!("found {:?}", result.counts(schema.len()));
    create_dir(&a.out)?;
    write_mined(&result, &schema, None, a.out.join("mined.json"), a.out.join("itemsets.csv"))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), ExperimentError> {
    let schema = load_schema_file(&a.schema)?.schema;
    let found = read_mined(&a.result, &schema)?;
    let truth = read_mined(&a.truth, &schema)?;
    let report = evaluate(&found, &truth)?;
    create_dir(&a.out)?;
    write_json(a.out.join("accuracy.json"), &report)?;
    write_accuracy_csv(std::slice::from_ref(&report), a.out.join("accuracy.csv"))
}

fn cmd_compare(a: CompareArgs) -> Result<(), ExperimentError> {
    let mut reports = Vec::new();
    for path in &a.configs {
        let mut config = ExperimentConfig::load(path)?;
        config.out = None;
        let report = run_experiment(&config)?;
        info!("{}: {} ms", report.label, report.runtime_ms);
        reports.push(report);
    }
    let tables = compare(&reports)?;
    tables.write(&a.out)?;
    write_json(a.out.join("reports.json"), &reports)
}

fn cmd_run(a: RunArgs) -> Result<(), ExperimentError> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(out) = a.out {
        config.out = Some(out);
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(out) = &config.out {
        create_dir(out)?;
    }
    let report = run_experiment(&config)?;
    println!("{}", serde_json::to_string_pretty(&report.lengths)?);
    Ok(())
}
