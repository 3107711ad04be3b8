mod common;

use common::*;
use frapp::experiment::{run_experiment, DatasetSource, ExperimentConfig, MechanismConfig, PrivacyConfig};
use frapp::mining::{apriori_plain, apriori_reconstructed, MiningOptions};
use frapp::perturb::{condition_number, perturb_dataset, GammaDiagonal, Mechanism, MechanismKind, PerturbedData};
use frapp::reconstruct::{count_full, reconstruct_full, FrequencyVector};
use frapp::rng::{self, Purpose};
use frapp::schema::{generate_synthetic, DistributionSpec};
use frapp::Schema;
use proptest::prelude::*;
use std::sync::Arc;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_admissible_matrix_beats_gamma_diagonal(seed in any::<u64>(), n in 2usize..=24, gamma in 1.5f64..80.0) {
        let mut rng = rng::stream(seed, Purpose::Test, 0);
        let m = random_admissible(&mut rng, n, gamma);
        prop_assert!(is_admissible(&m, gamma));
        let c = symmetric_condition(&m);
        prop_assert!(c >= optimal_condition(gamma, n) - 1e-9);
        // the library's condition number agrees with the eigen oracle
        let lib = condition_number(&m);
        prop_assert!(c.is_infinite() && lib.is_infinite() || (lib - c).abs() <= 1e-6 * c);
    }

    #[test]
    fn chain_sampler_reproduces_gamma_column(cards in prop::collection::vec(2usize..=5, 1..=4), gamma in 1.1f64..100.0, pick in any::<usize>()) {
        let schema = Schema::from_cardinalities(&cards).unwrap();
        let n = schema.domain_size();
        let g = GammaDiagonal::new(gamma, n).unwrap();
        let u = pick % n;
        let dist = g.sampler(&schema).unwrap().output_distribution(&schema.decode(u).unwrap());
        for (v, p) in dist.iter().enumerate() {
            let expected = if v == u { gamma * g.x() } else { g.x() };
            prop_assert!((p - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn noiseless_round_trip(counts in prop::collection::vec(0u32..1000, 2..=300), gamma in 1.1f64..100.0) {
        let n = counts.len();
        let g = GammaDiagonal::new(gamma, n).unwrap();
        let total: f64 = counts.iter().map(|&c| c as f64).sum();
        let y: Vec<f64> = counts.iter().map(|&c| (g.diagonal() - g.off_diagonal()) * c as f64 + g.off_diagonal() * total).collect();
        let back = reconstruct_full(&FrequencyVector::new(y, None), &g).unwrap();
        for (b, &c) in back.counts().iter().zip(&counts) {
            prop_assert!((b - c as f64).abs() <= 1e-9 * total.max(1.0));
        }
    }
}

#[test]
fn small_schema_enumeration() {
    let s = small_schemas(8);
    // 2,3,...,8 ; 2x2,2x3,2x4,3x2,4x2 ; 2x2x2
    assert_eq!(s.len(), 7 + 5 + 1);
    assert!(s.iter().all(|c| c.iter().product::<usize>() <= 8));
}

#[test]
fn brute_force_oracle_agrees_with_apriori_on_synthetic() {
    let schema = Arc::new(Schema::from_cardinalities(&[3, 4, 2, 5]).unwrap());
    let spec = DistributionSpec::Independent {
        weights: vec![vec![5.0, 1.0, 1.0], vec![4.0, 2.0, 1.0, 1.0], vec![1.0, 3.0], vec![6.0, 1.0, 1.0, 1.0, 1.0]],
    };
    let d = generate_synthetic(schema, 3000, &spec, 8).unwrap();
    for sup in [0.01, 0.05, 0.2] {
        assert_eq!(apriori_plain(&d, sup).unwrap().counts(4), brute_force_counts(&d, sup));
    }
}

#[test]
fn census_reconstruction_is_unbiased_in_aggregate() {
    let (schema, dataset) = census();
    let g = GammaDiagonal::new(19.0, schema.domain_size()).unwrap();
    let truth = count_full(&dataset);
    let mechanism = Mechanism::DetGd(g.clone());
    let mut mean = vec![0.0; schema.domain_size()];
    let runs = 8;
    for seed in 0..runs {
        let PerturbedData::Categorical(p) = perturb_dataset(&dataset, &mechanism, seed).unwrap() else { unreachable!() };
        let est = reconstruct_full(&count_full(&p), &g).unwrap();
        for (m, e) in mean.iter_mut().zip(est.counts()) {
            *m += e / runs as f64;
        }
    }
    // the estimate keeps the record count exactly
    let total: f64 = mean.iter().sum();
    assert!((total - dataset.len() as f64).abs() < 1e-6);
    // the most populated cell is recovered within its standard error
    let (top, &count) = truth.counts().iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let y = g.diagonal() * count + g.off_diagonal() * (dataset.len() as f64 - count);
    let se = (y * (1.0 - y / dataset.len() as f64)).sqrt() / (g.diagonal() - g.off_diagonal()) / (runs as f64).sqrt();
    assert!((mean[top] - count).abs() < 4.0 * se, "{} vs {count} (se {se})", mean[top]);
}

#[test]
fn mined_results_do_not_depend_on_thread_count() {
    let (schema, dataset) = census();
    let mechanism = Mechanism::DetGd(GammaDiagonal::new(19.0, schema.domain_size()).unwrap());
    let mine = || {
        let p = perturb_dataset(&dataset, &mechanism, 77).unwrap();
        apriori_reconstructed(&p, &schema, &mechanism, 0.02, &MiningOptions::default()).unwrap()
    };
    let many = mine();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(mine);
    assert_eq!(many, one);
}

#[test]
fn experiment_reports_hash_identically() {
    let d = data_dir();
    let config = ExperimentConfig {
        name: Some("census-mask".into()),
        schema: d.join("schemas/census.toml"),
        dataset: DatasetSource::Csv {
            paths: vec![d.join("adult/adult.data")],
            header: false,
            columns: None,
            abort_on_missing: false,
            clamp: false,
        },
        mechanism: MechanismConfig::new(MechanismKind::Mask),
        privacy: PrivacyConfig::default(),
        sup_min: 0.02,
        seed: 1,
        repeats: 2,
        out: None,
        max_subset_cells: None,
    };
    let a = run_experiment(&config).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap().install(|| run_experiment(&config).unwrap());
    assert_eq!(a.content_hash(), b.content_hash());
    assert_eq!(a.truth_counts.len(), 6);
    assert!(a.condition_numbers.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn shipped_configs_load_and_validate() {
    let dir = data_dir().join("configs");
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let config = ExperimentConfig::load(&path).unwrap();
        assert!(config.schema.exists(), "{}", path.display());
        if let DatasetSource::Csv { paths, .. } = &config.dataset {
            assert!(paths.iter().all(|p| p.exists()));
        }
        kinds.push(config.mechanism.kind);
    }
    kinds.sort_by_key(|k| k.label());
    assert_eq!(kinds.len(), 4);
}
