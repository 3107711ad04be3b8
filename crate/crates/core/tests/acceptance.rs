//! Acceptance harness: one PASS/FAIL line per criterion.

mod common;

use common::*;
use frapp::experiment::{run_experiment, DatasetSource, ExperimentConfig, ExperimentReport, MechanismConfig, PrivacyConfig};
use frapp::mining::{apriori_plain, apriori_reconstructed, MiningOptions};
use frapp::perturb::{
    mask_condition_number, mask_matrix, mask_p_for_gamma, perturb_dataset, GammaDiagonal, Mechanism, MechanismKind,
    PerturbedData, RandomizedGamma,
};
use frapp::privacy::{gamma_for, posterior_range, worst_case_posterior, PrivacyTarget};
use frapp::reconstruct::{count_full, reconstruct_full, FrequencyVector, SubsetIndexer, SubsetMarginal};
use frapp::schema::{generate_synthetic, DistributionSpec};
use frapp::rng::{self, Purpose};
use frapp::Schema;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn privacy_calculus() -> Outcome {
    let g = gamma_for(PrivacyTarget::new(0.05, 0.50).unwrap());
    let p = worst_case_posterior(0.05, 19.0);
    check(g == 19.0 && p == 0.5, format!("gamma = {g}, posterior = {p}"))
}

fn mask_parameters() -> Outcome {
    let p6 = mask_p_for_gamma(19.0, 6);
    let p7 = mask_p_for_gamma(19.0, 7);
    check(
        (p6 - 0.5610).abs() <= 1e-4 && (p7 - 0.5524).abs() <= 1e-4,
        format!("p(19, 6) = {p6:.5}, p(19, 7) = {p7:.5}"),
    )
}

fn posterior_range_census() -> Outcome {
    let (lo, hi) = posterior_range(0.05, 19.0, 0.5, 2000).map_err(|e| e.to_string())?;
    check((lo - 0.333).abs() <= 0.005 && (hi - 0.600).abs() <= 0.005, format!("[{lo:.4}, {hi:.4}]"))
}

fn gamma_diagonal_optimality() -> Outcome {
    let results: Vec<(usize, f64, f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(4, Purpose::Test, i);
            let n = rng.gen_range(2..=32);
            let gamma = if i % 2 == 0 { 19.0 } else { rng.gen_range(1.5..60.0) };
            let m = random_admissible(&mut rng, n, gamma);
            assert!(is_admissible(&m, gamma));
            (n, gamma, symmetric_condition(&m), optimal_condition(gamma, n))
        })
        .collect();
    let violations = results.iter().filter(|(_, _, c, b)| *c < b - 1e-9).count();
    let tightest = results.iter().map(|(_, _, c, b)| c / b).fold(f64::INFINITY, f64::min);
    let mut equality = 0.0f64;
    for n in 2..=32 {
        for gamma in [1.5, 19.0, 99.0] {
            let g = GammaDiagonal::new(gamma, n).unwrap();
            let dense = DMatrix::from_fn(n, n, |i, j| g.entry(j, i));
            let c = symmetric_condition(&dense);
            equality = equality.max((c - optimal_condition(gamma, n)).abs() / optimal_condition(gamma, n));
        }
    }
    check(
        violations == 0 && equality < 1e-9,
        format!("1000 matrices, {violations} below bound, min cond/bound = {tightest:.4}, gamma-diagonal rel. gap {equality:.1e}"),
    )
}

fn chain_sampler_exactness() -> Outcome {
    let schemas = small_schemas(256);
    let worst = schemas
        .par_iter()
        .map(|cards| {
            let schema = Schema::from_cardinalities(cards).unwrap();
            let g = GammaDiagonal::new(19.0, schema.domain_size()).unwrap();
            let sampler = g.sampler(&schema).unwrap();
            let mut worst = 0.0f64;
            for u in 0..schema.domain_size() {
                let dist = sampler.output_distribution(&schema.decode(u).unwrap());
                for (v, p) in dist.iter().enumerate() {
                    let expected = if u == v { 19.0 * g.x() } else { g.x() };
                    worst = worst.max((p - expected).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    check(worst <= 1e-12, format!("{} schemas, all inputs, max |diff| = {worst:.2e}", schemas.len()))
}

fn dense_gamma(gamma: f64, n: usize) -> DMatrix<f64> {
    let x = 1.0 / (gamma + n as f64 - 1.0);
    DMatrix::from_fn(n, n, |i, j| if i == j { gamma * x } else { x })
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs() / q.abs().max(1.0)).fold(0.0, f64::max)
}

fn reconstruction_oracles() -> Outcome {
    let mut full_gap = 0.0f64;
    let mut full_round = 0.0f64;
    let mut sub_gap = 0.0f64;
    let mut sub_round = 0.0f64;
    for trial in 0..60u64 {
        let mut rng = rng::stream(6, Purpose::Test, trial);
        let n = if trial < 4 { [2, 3, 511, 512][trial as usize] } else { rng.gen_range(2..=512) };
        let gamma = rng.gen_range(1.2..100.0);
        let g = GammaDiagonal::new(gamma, n).unwrap();
        let a = dense_gamma(gamma, n);
        let lu = a.clone().lu();

        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1000.0)).collect();
        let closed = reconstruct_full(&FrequencyVector::new(y.clone(), None), &g).unwrap();
        let dense = lu.solve(&DVector::from_vec(y)).unwrap();
        full_gap = full_gap.max(max_rel_diff(closed.counts(), dense.as_slice()));

        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..500) as f64).collect();
        let ax = &a * DVector::from_vec(x.clone());
        let back = reconstruct_full(&FrequencyVector::new(ax.as_slice().to_vec(), None), &g).unwrap();
        full_round = full_round.max(max_rel_diff(back.counts(), &x));

        // subset marginals of a random schema whose domain is at most 512
        let mut cards = Vec::new();
        while cards.len() < 5 {
            let c = rng.gen_range(2..=6);
            if cards.iter().product::<usize>() * c > 512 {
                break;
            }
            cards.push(c);
        }
        let schema = Schema::from_cardinalities(&cards).unwrap();
        let ns = schema.domain_size();
        let gs = GammaDiagonal::new(gamma, ns).unwrap();
        let attrs: Vec<usize> = (0..cards.len()).filter(|_| rng.gen_bool(0.6)).collect();
        let attrs = if attrs.is_empty() { vec![0] } else { attrs };
        let marginal = SubsetMarginal::new(&schema, &attrs, &gs).unwrap();
        let indexer = SubsetIndexer::new(&schema, &attrs).unwrap();
        let k = indexer.size();
        // collapse the full matrix: rows summed over each cell's preimage,
        // column taken at one representative
        let full = dense_gamma(gamma, ns);
        let mut collapsed = DMatrix::zeros(k, k);
        let mut representative = vec![None; k];
        for u in 0..ns {
            let cu = indexer.index(&schema.decode(u).unwrap());
            representative[cu].get_or_insert(u);
        }
        for (cu, rep) in representative.iter().enumerate() {
            for v in 0..ns {
                let cv = indexer.index(&schema.decode(v).unwrap());
                collapsed[(cv, cu)] += full[(v, rep.unwrap())];
            }
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let ys: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let closed = marginal.reconstruct(&ys).unwrap();
        let dense = collapsed.clone().lu().solve(&DVector::from_vec(ys)).unwrap();
        sub_gap = sub_gap.max(max_rel_diff(&closed, dense.as_slice()));

        let xs: Vec<f64> = {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            let t: f64 = raw.iter().sum();
            raw.iter().map(|v| v / t).collect()
        };
        let axs = &collapsed * DVector::from_vec(xs.clone());
        let back = marginal.reconstruct(axs.as_slice()).unwrap();
        sub_round = sub_round.max(max_rel_diff(&back, &xs));
    }
    check(
        full_gap <= 1e-8 && sub_gap <= 1e-8 && full_round <= 1e-9 && sub_round <= 1e-9,
        format!(
            "closed vs dense: full {full_gap:.1e}, subset {sub_gap:.1e}; round trip: full {full_round:.1e}, subset {sub_round:.1e}"
        ),
    )
}

fn census_ground_truth() -> Outcome {
    let (_, dataset) = census();
    let mined = apriori_plain(&dataset, 0.02).map_err(|e| e.to_string())?;
    let counts = mined.counts(6);
    let oracle = brute_force_counts(&dataset, 0.02);
    let table = vec![19, 102, 203, 165, 64, 10];
    check(
        counts == table && counts == oracle,
        format!("N = {}, apriori {counts:?}, brute force {oracle:?}, published {table:?}", dataset.len()),
    )
}

const SEEDS: usize = 5;

fn census_config(kind: MechanismKind) -> ExperimentConfig {
    let d = data_dir();
    let mut mechanism = MechanismConfig::new(kind);
    if kind == MechanismKind::RanGd {
        mechanism.alpha_fraction = Some(0.5);
    }
    ExperimentConfig {
        name: None,
        schema: d.join("schemas/census.toml"),
        dataset: DatasetSource::Csv {
            paths: vec![d.join("adult/adult.data"), d.join("adult/adult.test")],
            header: false,
            columns: None,
            abort_on_missing: false,
            clamp: false,
        },
        mechanism,
        privacy: PrivacyConfig { rho1: 0.05, rho2: 0.5, gamma: None },
        sup_min: 0.02,
        seed: 2024,
        repeats: SEEDS,
        out: None,
        max_subset_cells: None,
    }
}

fn rho_row(r: &ExperimentReport) -> Vec<Option<f64>> {
    r.lengths.iter().map(|l| l.rho).collect()
}

fn fmt_row(v: &[Option<f64>]) -> String {
    v.iter().map(|x| x.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into())).collect::<Vec<_>>().join("/")
}

/// Mean relative support error, in percent, of every itemset of `length`
/// that MASK reports across the seeds, against supports counted in the
/// original records; `None` when nothing of that length is reported.
fn reported_error(mask: &ExperimentReport, length: usize) -> Option<f64> {
    let (schema, dataset) = census();
    let mut errors = Vec::new();
    for &seed in &mask.seeds {
        let perturbed = perturb_dataset(&dataset, &mask.mechanism, seed).unwrap();
        let mined = apriori_reconstructed(&perturbed, &schema, &mask.mechanism, mask.sup_min, &MiningOptions::default()).unwrap();
        for f in mined.itemsets(length) {
            let t = true_support(&dataset, &f.itemset);
            errors.push(100.0 * (f.support - t).abs() / t);
        }
    }
    (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64)
}

fn census_comparison(det: &ExperimentReport, mask: &ExperimentReport) -> Outcome {
    let (rd, rm) = (rho_row(det), rho_row(mask));
    // (a) MASK without any correct itemset at a length counts as unbounded error
    let a = (3..=6).all(|k| match (rd[k - 1], rm[k - 1]) {
        (Some(d), Some(m)) => d < m,
        (Some(_), None) => true,
        (None, _) => false,
    });
    let above: Vec<Option<f64>> = (5..=6).map(|k| reported_error(mask, k)).collect();
    let b = above.iter().all(|e| e.map_or(true, |e| e > 100.0));
    let cd = &det.condition_numbers;
    let cm = &mask.condition_numbers;
    let p = match &mask.mechanism {
        Mechanism::Mask(m) => m.p(),
        _ => unreachable!(),
    };
    let eigen_ok = (1..=6).all(|k| {
        let m = mask_matrix(k, p).unwrap();
        let c = symmetric_condition(m.entries());
        (c - cm[k - 1]).abs() <= 1e-6 * c
    });
    let c = cd.windows(2).all(|w| w[0] == w[1])
        && cm.windows(2).all(|w| w[1] > w[0])
        && eigen_ok
        && mask_condition_number(12, p) > 1e4;
    check(
        a && b && c,
        format!(
            "{SEEDS} seeds, N = {}; rho DET {} vs MASK {}; MASK found {:?}, error of reported itemsets above length 4 {}; cond DET {:.1} const, MASK {:.3e}..{:.3e}, width 12 {:.2e} [a={a} b={b} c={c}]",
            det.records,
            fmt_row(&rd),
            fmt_row(&rm),
            mask.lengths.iter().map(|l| l.mean_found).collect::<Vec<_>>(),
            fmt_row(&above),
            cd[0],
            cm[0],
            cm[5],
            mask_condition_number(12, p)
        ),
    )
}

fn randomized_tradeoff(det: &ExperimentReport, ran: &ExperimentReport) -> Outcome {
    let (rd, rr) = (rho_row(det), rho_row(ran));
    let mut compared = 0;
    let mut within = true;
    for (d, r) in rd.iter().zip(&rr) {
        match (d, r) {
            (Some(d), Some(r)) => {
                compared += 1;
                within &= r / d <= 2.0 && d / r <= 2.0;
            }
            (None, None) => {}
            _ => within = false,
        }
    }
    let (low, high) = ran.posterior.posterior_range.unwrap_or((f64::NAN, f64::NAN));
    let det_post = det.posterior.posterior;
    let same_cond = det.condition_numbers == ran.condition_numbers;
    check(
        within && compared > 0 && (low - 0.333).abs() <= 0.005 && (det_post - 0.5).abs() < 1e-12 && same_cond,
        format!(
            "rho DET {} vs RAN {}; posterior at r = -alpha {low:.3} (range up to {high:.3}) vs DET {det_post:.3}",
            fmt_row(&rd),
            fmt_row(&rr)
        ),
    )
}

fn variance_property() -> Outcome {
    const RUNS: u64 = 10_000;
    let schema = Arc::new(Schema::from_cardinalities(&[4, 5]).unwrap());
    let n = schema.domain_size();
    let weights: Vec<f64> = (1..=n).map(|v| v as f64).collect();
    let dataset = generate_synthetic(schema.clone(), 1000, &DistributionSpec::Joint { weights }, 10).unwrap();
    let total = dataset.len() as f64;
    let base = GammaDiagonal::new(19.0, n).unwrap();
    let ran = RandomizedGamma::from_fraction(base.clone(), 0.5).unwrap();
    let x = count_full(&dataset).into_counts();
    let ax: Vec<f64> = x.iter().map(|xv| (base.diagonal() - base.off_diagonal()) * xv + base.off_diagonal() * total).collect();
    let codes: Vec<usize> = dataset.records().iter().map(|r| schema.encode(r)).collect();

    let counts = |data: PerturbedData| match data {
        PerturbedData::Categorical(d) => count_full(&d).into_counts(),
        PerturbedData::Boolean(_) => unreachable!(),
    };
    // per run and cell: squared deviation from the conditional mean, DET then RAN
    let diffs: Vec<(Vec<f64>, Vec<f64>)> = (0..RUNS)
        .into_par_iter()
        .map(|seed| {
            let y_det = counts(perturb_dataset(&dataset, &Mechanism::DetGd(base.clone()), seed).unwrap());
            let y_ran = counts(perturb_dataset(&dataset, &Mechanism::RanGd(ran.clone()), seed).unwrap());
            let mut cond = vec![0.0; n];
            for (i, &u) in codes.iter().enumerate() {
                let p = ran.client_params(seed, i as u64);
                for (v, c) in cond.iter_mut().enumerate() {
                    *c += if v == u { p.diag } else { p.off };
                }
            }
            let det_sq = y_det.iter().zip(&ax).map(|(y, e)| (y - e).powi(2)).collect();
            let ran_sq = y_ran.iter().zip(&cond).map(|(y, e)| (y - e).powi(2)).collect();
            (det_sq, ran_sq)
        })
        .collect();

    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - 0.01 / n as f64);
    let alpha = ran.alpha();
    let mut worst_t = f64::NEG_INFINITY;
    let mut det_total = 0.0;
    let mut ran_total = 0.0;
    let mut predicted_gap = 0.0;
    for v in 0..n {
        let d: Vec<f64> = diffs.iter().map(|(det, ran)| ran[v] - det[v]).collect();
        let mean = d.iter().sum::<f64>() / RUNS as f64;
        let var = d.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (RUNS - 1) as f64;
        worst_t = worst_t.max(mean / (var / RUNS as f64).sqrt());
        det_total += diffs.iter().map(|(det, _)| det[v]).sum::<f64>() / RUNS as f64;
        ran_total += diffs.iter().map(|(_, ran)| ran[v]).sum::<f64>() / RUNS as f64;
        predicted_gap += alpha * alpha / 3.0 * (x[v] + (total - x[v]) / ((n - 1) as f64).powi(2));
    }
    check(
        worst_t <= z && ran_total < det_total,
        format!(
            "{RUNS} paired runs, n = {n}, N = {total}; max one-sided t = {worst_t:.2} (limit {z:.2}); summed variance DET {det_total:.1} vs RAN {ran_total:.1} (predicted gap {predicted_gap:.1})"
        ),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} {id:>2} {name} ({secs:.1}s): {detail}");
    ok
}

fn main() {
    let mut ok = true;
    ok &= run(1, "privacy calculus", privacy_calculus);
    ok &= run(2, "MASK parameters", mask_parameters);
    ok &= run(3, "posterior range", posterior_range_census);
    ok &= run(4, "gamma-diagonal optimality", gamma_diagonal_optimality);
    ok &= run(5, "chain sampler exactness", chain_sampler_exactness);
    ok &= run(6, "reconstruction oracles", reconstruction_oracles);
    ok &= run(7, "CENSUS ground truth", census_ground_truth);

    let reports = catch_unwind(|| {
        [MechanismKind::DetGd, MechanismKind::Mask, MechanismKind::RanGd]
            .map(|k| run_experiment(&census_config(k)).map_err(|e| e.to_string()))
    });
    let get = |i: usize| -> Result<ExperimentReport, String> {
        match &reports {
            Ok(r) => r[i].clone(),
            Err(_) => Err("experiment panicked".into()),
        }
    };
    ok &= run(8, "CENSUS DET-GD vs MASK", || census_comparison(&get(0)?, &get(1)?));
    ok &= run(9, "RAN-GD tradeoff", || randomized_tradeoff(&get(0)?, &get(2)?));
    ok &= run(10, "RAN-GD variance", variance_property);
    if !ok {
        std::process::exit(1);
    }
}
