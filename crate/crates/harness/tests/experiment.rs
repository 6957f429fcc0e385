use std::time::Instant;

use kt_core::par::Execution;
use kt_core::rng::seeded_rng;
use kt_core::theory::gaussian_matrix;
use kt_core::{DataMatrix, KernelSpec};
use kt_harness::config::{
    KernelConfig, MetricKind, RidgeConfig, SweepConfig, SyntheticTask, TheoryCheck, TheoryConfig, Variant,
};
use kt_harness::experiment::run_experiment_with;
use kt_harness::io::{load_matrix, save_matrix, MatrixFormat};
use kt_harness::report::{mean_stderr, Record};
use kt_harness::tasks::{ClusterTaskSpec, LinearTaskSpec};
use kt_harness::validation::{run_theory_validation_with, Formulas};
use kt_harness::{run_experiment, ExperimentConfig, ExperimentReport};

fn linear_config(n_t: Vec<usize>, seeds: u64, variants: Vec<Variant>) -> ExperimentConfig {
    ExperimentConfig {
        kernels: KernelConfig {
            source: KernelSpec::Linear,
            head: KernelSpec::Linear,
            correction: KernelSpec::Linear,
        },
        ridge: RidgeConfig {
            source: 0.0,
            head: 0.0,
            correction: 0.0,
        },
        synthetic: Some(SyntheticTask::Linear(LinearTaskSpec::default())),
        sweep: SweepConfig {
            n_t,
            seeds: (0..seeds).collect(),
            variants,
            metrics: vec![MetricKind::Risk],
        },
        ..ExperimentConfig::default()
    }
}

fn values(r: &ExperimentReport, variant: &str, n_t: usize) -> Vec<f64> {
    r.runs()
        .filter(|x| x.variant == variant && x.n_t == n_t)
        .map(|x| x.value)
        .collect()
}

#[test]
fn baseline_risk_matches_unseen_fraction() {
    let cfg = linear_config(vec![4, 16, 28], 400, vec![Variant::Baseline]);
    let report = run_experiment(&cfg, 3).unwrap();
    assert!(!report.any_failure());
    for n_t in [4, 16, 28] {
        let v = values(&report, "baseline", n_t);
        assert_eq!(v.len(), 400);
        let (mean, se) = mean_stderr(&v);
        let expected = 1.0 - n_t as f64 / 32.0;
        assert!((mean - expected).abs() <= 4.0 * se, "n_t={n_t}: {mean} vs {expected} (se {se})");
    }
}

#[test]
fn translated_helps_when_source_matches_target() {
    let spec = ClusterTaskSpec {
        merged_source: true,
        ..ClusterTaskSpec::default()
    };
    let cfg = ExperimentConfig {
        synthetic: Some(SyntheticTask::Clusters(spec)),
        sweep: SweepConfig {
            n_t: vec![50],
            seeds: (0..3).collect(),
            variants: vec![Variant::Baseline, Variant::Translated],
            metrics: vec![MetricKind::Accuracy],
        },
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg, 11).unwrap();
    let t = values(&report, "translated", 50);
    let b = values(&report, "baseline", 50);
    for (t, b) in t.iter().zip(&b) {
        assert!(t >= b, "translated {t} < baseline {b}");
    }
}

#[test]
fn sweep_is_schedule_independent() {
    let cfg = linear_config(vec![4, 16], 6, vec![Variant::Baseline, Variant::Projected, Variant::Translated]);
    let a = run_experiment_with(&cfg, 5, Execution::Sequential).unwrap();
    let b = run_experiment_with(&cfg, 5, Execution::Parallel).unwrap();
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.digest(), run_experiment(&cfg, 6).unwrap().digest());
}

#[test]
fn oversized_subsample_is_recorded_not_fatal() {
    let cfg = linear_config(vec![4, 29], 2, vec![Variant::Baseline]);
    let report = run_experiment(&cfg, 0).unwrap();
    assert_eq!(report.runs().count(), 2);
    let failures = report.records.iter().filter(|r| matches!(r, Record::Failure(_))).count();
    assert_eq!(failures, 2);
}

fn small_theory(checks: Vec<TheoryCheck>) -> TheoryConfig {
    TheoryConfig {
        checks,
        n_s: vec![8, 32],
        n_t: vec![4, 28],
        draws_per_cell: 1,
        trials: 1000,
        ..TheoryConfig::default()
    }
}

fn risk_failures(r: &ExperimentReport) -> usize {
    r.records
        .iter()
        .filter(|x| matches!(x, Record::Risk(c) if !c.passed))
        .count()
}

#[test]
fn correct_formulas_pass_small_grid() {
    let cfg = small_theory(vec![TheoryCheck::Translated, TheoryCheck::Baseline]);
    let r = run_theory_validation_with(&cfg, 9, &Formulas::default(), Execution::Parallel).unwrap();
    assert_eq!(risk_failures(&r), 0);
}

#[test]
fn perturbed_translated_formula_is_detected() {
    let cfg = small_theory(vec![TheoryCheck::Translated]);
    let formulas = Formulas {
        translated: |p| Ok(1.05 * kt_core::theory::translated_risk_closed_form(p)? + 0.01),
        ..Formulas::default()
    };
    let r = run_theory_validation_with(&cfg, 9, &formulas, Execution::Parallel).unwrap();
    assert!(risk_failures(&r) > 0);
}

#[test]
fn perturbed_baseline_formula_is_detected() {
    let cfg = small_theory(vec![TheoryCheck::Baseline]);
    let formulas = Formulas {
        baseline: |p| Ok(kt_core::theory::baseline_risk(p) * (1.0 + 1.0 / p.d() as f64)),
        ..Formulas::default()
    };
    let r = run_theory_validation_with(&cfg, 9, &formulas, Execution::Parallel).unwrap();
    assert!(risk_failures(&r) > 0);
}

#[test]
fn large_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = DataMatrix::new(gaussian_matrix(978, 10_000, &mut seeded_rng(1))).unwrap();
    let bin = dir.path().join("m.ktm");
    let start = Instant::now();
    save_matrix(&bin, &m, MatrixFormat::Bin).unwrap();
    let back = load_matrix(&bin, MatrixFormat::Bin).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(back.as_matrix(), m.as_matrix());
    assert!(elapsed.as_secs_f64() < 2.0, "binary round trip took {elapsed:?}");

    let csv = dir.path().join("m.csv");
    let start = Instant::now();
    save_matrix(&csv, &m, MatrixFormat::Csv).unwrap();
    let back = load_matrix(&csv, MatrixFormat::Csv).unwrap();
    println!("csv round trip of 10000 x 978: {:?}", start.elapsed());
    assert_eq!(back.as_matrix(), m.as_matrix());
}
