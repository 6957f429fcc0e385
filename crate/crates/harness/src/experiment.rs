//! Sample-size sweeps over transfer variants.

use std::time::Instant;

use kt_core::par::{self, Execution};
use kt_core::rng::{derive_seed, seeded_rng};
use kt_core::scaling::{fit_log_law, CurvePoint};
use kt_core::{
    accuracy, fit_combined_scaled, fit_exact, fit_projected, fit_translated, mean_cosine, mean_r2,
    pearson_r, DataMatrix, KernelModel, LabeledDataset, TransferModel,
};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::config::{DataConfig, ExperimentConfig, MetricKind, SyntheticTask, Variant};
use crate::error::{HarnessError, Result};
use crate::io::{load_labels, load_matrix_auto};
use crate::report::{mean_stderr, ExperimentReport, FailureRecord, FitRecord, Record, RunRecord};

const TASK: u64 = 21;
const PERMUTATION: u64 = 22;

/// Everything a sweep needs for one seed.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub source: Option<LabeledDataset>,
    pub target_pool: LabeledDataset,
    pub test: Option<LabeledDataset>,
    pub test_labels: Option<Vec<usize>>,
    pub test_groups: Option<Vec<usize>>,
    /// True target map, for the risk metric on linear tasks.
    pub omega_t: Option<DMatrix<f64>>,
}

fn labels_or_matrix(path: &std::path::Path, classes: Option<usize>, classification: bool) -> Result<(DataMatrix, Option<Vec<usize>>)> {
    if classification {
        let labels = load_labels(path)?;
        let c = classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
        Ok((DataMatrix::one_hot(&labels, c)?, Some(labels)))
    } else {
        Ok((load_matrix_auto(path)?, None))
    }
}

fn required<'a>(p: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a std::path::Path> {
    p.as_deref()
        .ok_or_else(|| HarnessError::Config(format!("data.{key} is required")))
}

/// Loads file-backed data. Class counts come from the largest label seen in
/// any split, so one-hot widths agree.
pub fn load_task_data(data: &DataConfig) -> Result<TaskData> {
    let mut classes = None;
    if data.classification {
        let mut max = 0;
        for p in [&data.source_y, &data.target_y, &data.test_y].into_iter().flatten() {
            max = max.max(load_labels(p)?.into_iter().max().unwrap_or(0));
        }
        classes = Some(max + 1);
    }
    let split = |x: &Option<std::path::PathBuf>, y: &Option<std::path::PathBuf>, kx: &str, ky: &str| -> Result<(LabeledDataset, Option<Vec<usize>>)> {
        let xm = load_matrix_auto(required(x, kx)?)?;
        let (ym, labels) = labels_or_matrix(required(y, ky)?, classes, data.classification)?;
        Ok((LabeledDataset::new(xm, ym)?, labels))
    };
    let (target_pool, _) = split(&data.target_x, &data.target_y, "target_x", "target_y")?;
    let source = match (&data.source_x, &data.source_y) {
        (None, None) => None,
        _ => Some(split(&data.source_x, &data.source_y, "source_x", "source_y")?.0),
    };
    let (test, test_labels) = match (&data.test_x, &data.test_y) {
        (None, None) => (None, None),
        _ => {
            let (t, l) = split(&data.test_x, &data.test_y, "test_x", "test_y")?;
            (Some(t), l)
        }
    };
    let test_groups = data.test_groups.as_deref().map(load_labels).transpose()?;
    Ok(TaskData {
        source,
        target_pool,
        test,
        test_labels,
        test_groups,
        omega_t: None,
    })
}

pub fn synthetic_task_data(task: &SyntheticTask, seed: u64) -> Result<TaskData> {
    match task {
        SyntheticTask::Clusters(spec) => {
            let t = spec.generate(seed)?;
            Ok(TaskData {
                source: Some(t.source.data),
                target_pool: t.target_pool.data,
                test: Some(t.target_test.data),
                test_labels: Some(t.target_test.labels),
                test_groups: None,
                omega_t: None,
            })
        }
        SyntheticTask::Linear(spec) => {
            let t = spec.generate(seed)?;
            Ok(TaskData {
                source: Some(t.source),
                target_pool: t.target_pool,
                test: None,
                test_labels: None,
                test_groups: None,
                omega_t: Some(t.params.omega_t().clone()),
            })
        }
    }
}

/// The seed's permutation of the target pool. Every `n_t` subsample is a
/// prefix of it, so larger subsamples contain smaller ones.
pub fn subsample_order(master: u64, seed: u64, pool: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool).collect();
    idx.shuffle(&mut seeded_rng(derive_seed(master, &[PERMUTATION, seed])));
    idx
}

enum Fitted {
    Kernel(KernelModel),
    Transfer(TransferModel),
}

impl Fitted {
    fn predict(&self, x: &DataMatrix) -> kt_core::Result<DataMatrix> {
        match self {
            Fitted::Kernel(m) => m.predict(x),
            Fitted::Transfer(m) => m.predict(x),
        }
    }

    /// Explicit weights when every component uses a linear kernel.
    fn linear_weights(&self) -> Option<DMatrix<f64>> {
        match self {
            Fitted::Kernel(m) => m.linear_weights().map(|w| w.0),
            Fitted::Transfer(TransferModel::Projected { source, head }) => {
                Some(head.linear_weights()?.0 * source.linear_weights()?.0)
            }
            Fitted::Transfer(TransferModel::Translated { source, correction }) => {
                Some(source.linear_weights()?.0 + correction.linear_weights()?.0)
            }
            Fitted::Transfer(TransferModel::Combined { source, head, scales }) => {
                let h = head.linear_weights()?.0;
                let ws = source.linear_weights()?.0;
                let c = ws.nrows();
                let d = ws.ncols();
                Some(h.columns(0, c) * &ws * scales.source + h.columns(c, d) * scales.features)
            }
        }
    }
}

fn fit_variant(
    cfg: &ExperimentConfig,
    variant: Variant,
    source: Option<&KernelModel>,
    target: &LabeledDataset,
) -> Result<Fitted> {
    let need = || {
        source.ok_or_else(|| HarnessError::Config(format!("variant {} needs a source model", variant.name())))
    };
    let k = &cfg.kernels;
    let r = &cfg.ridge;
    Ok(match variant {
        Variant::Baseline => Fitted::Kernel(fit_exact(&k.source, target, r.source)?),
        Variant::Source => {
            let s = need()?;
            if s.output_dim() != target.label_dim() {
                return Err(HarnessError::Core(kt_core::Error::Dimension(format!(
                    "source predicts {} outputs but the target has {}",
                    s.output_dim(),
                    target.label_dim()
                ))));
            }
            Fitted::Kernel(s.clone())
        }
        Variant::Projected => Fitted::Transfer(fit_projected(need()?, target, &k.head, r.head)?),
        Variant::Translated => Fitted::Transfer(fit_translated(need()?, target, &k.correction, r.correction)?),
        Variant::Combined => Fitted::Transfer(fit_combined_scaled(
            need()?,
            target,
            &k.head,
            r.head,
            cfg.transfer.scales,
        )?),
    })
}

fn evaluate(data: &TaskData, model: &Fitted, metric: MetricKind) -> Result<(f64, usize)> {
    if metric == MetricKind::Risk {
        let wt = data
            .omega_t
            .as_ref()
            .ok_or_else(|| HarnessError::Config("risk metric needs the synthetic linear task".into()))?;
        let w = model
            .linear_weights()
            .ok_or_else(|| HarnessError::Config("risk metric needs linear kernels".into()))?;
        return Ok(((w - wt).norm_squared(), 0));
    }
    let test = data
        .test
        .as_ref()
        .ok_or_else(|| HarnessError::Config(format!("metric {} needs a test split", metric.name())))?;
    let pred = model.predict(&test.x)?;
    Ok(match metric {
        MetricKind::Accuracy => {
            let labels = data
                .test_labels
                .as_ref()
                .ok_or_else(|| HarnessError::Config("accuracy needs integer test labels".into()))?;
            (accuracy(&pred, labels)?, 0)
        }
        MetricKind::PearsonR => (pearson_r(&pred, &test.y)?, 0),
        MetricKind::MeanR2 => {
            let m = mean_r2(&pred, &test.y)?;
            (m.value, m.excluded)
        }
        MetricKind::MeanCosine => {
            let m = mean_cosine(&pred, &test.y, data.test_groups.as_deref())?;
            (m.value, m.excluded)
        }
        MetricKind::Risk => unreachable!(),
    })
}

pub fn curve_id(variant: Variant, metric: MetricKind) -> String {
    format!("{}/{}", variant.name(), metric.name())
}

fn run_seed(cfg: &ExperimentConfig, master: u64, seed: u64, shared: Option<&TaskData>) -> Vec<Record> {
    let mut out = Vec::new();
    let fail_all = |out: &mut Vec<Record>, err: &HarnessError| {
        for &n_t in &cfg.sweep.n_t {
            for v in &cfg.sweep.variants {
                out.push(Record::Failure(FailureRecord {
                    variant: v.name().into(),
                    n_t,
                    seed,
                    error: err.to_string(),
                }));
            }
        }
    };
    let owned;
    let data = match (shared, &cfg.synthetic) {
        (Some(d), _) => d,
        (None, Some(task)) => match synthetic_task_data(task, derive_seed(master, &[TASK, seed])) {
            Ok(d) => {
                owned = d;
                &owned
            }
            Err(e) => {
                fail_all(&mut out, &e);
                return out;
            }
        },
        (None, None) => {
            fail_all(&mut out, &HarnessError::Config("no data source configured".into()));
            return out;
        }
    };
    let needs_source = cfg.sweep.variants.iter().any(|v| *v != Variant::Baseline);
    let source = match (&data.source, needs_source) {
        (Some(s), true) => match fit_exact(&cfg.kernels.source, s, cfg.ridge.source) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("seed {seed}: source fit failed: {e}");
                None
            }
        },
        _ => None,
    };
    let n_s = data.source.as_ref().map_or(0, |s| s.len());
    let order = subsample_order(master, seed, data.target_pool.len());
    for &n_t in &cfg.sweep.n_t {
        if n_t > order.len() {
            for v in &cfg.sweep.variants {
                out.push(Record::Failure(FailureRecord {
                    variant: v.name().into(),
                    n_t,
                    seed,
                    error: format!("n_t = {n_t} exceeds the target pool of {}", order.len()),
                }));
            }
            continue;
        }
        let target = data.target_pool.subset(&order[..n_t]);
        for &variant in &cfg.sweep.variants {
            let start = Instant::now();
            let fitted = fit_variant(cfg, variant, source.as_ref(), &target);
            let model = match fitted {
                Ok(m) => m,
                Err(e) => {
                    out.push(Record::Failure(FailureRecord {
                        variant: variant.name().into(),
                        n_t,
                        seed,
                        error: e.to_string(),
                    }));
                    continue;
                }
            };
            for &metric in &cfg.sweep.metrics {
                match evaluate(data, &model, metric) {
                    Ok((value, excluded)) => out.push(Record::Run(RunRecord {
                        curve_id: curve_id(variant, metric),
                        variant: variant.name().into(),
                        n_s: if variant == Variant::Baseline { 0 } else { n_s },
                        n_t,
                        seed,
                        metric: metric.name().into(),
                        value,
                        excluded,
                        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                    })),
                    Err(e) => out.push(Record::Failure(FailureRecord {
                        variant: variant.name().into(),
                        n_t,
                        seed,
                        error: e.to_string(),
                    })),
                }
            }
        }
    }
    out
}

/// Runs every `(seed, n_t, variant, metric)` cell, then fits the
/// logarithmic law to each curve's per-`n_t` means. Failed cells are
/// recorded and the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig, master: u64) -> Result<ExperimentReport> {
    run_experiment_with(cfg, master, Execution::Parallel)
}

pub fn run_experiment_with(cfg: &ExperimentConfig, master: u64, exec: Execution) -> Result<ExperimentReport> {
    cfg.validate()?;
    let shared = if cfg.synthetic.is_none() {
        Some(load_task_data(&cfg.data)?)
    } else {
        None
    };
    let seeds = &cfg.sweep.seeds;
    let per_seed = par::map_range(exec, seeds.len(), |i| run_seed(cfg, master, seeds[i], shared.as_ref()));
    let mut report = ExperimentReport::default();
    for records in per_seed {
        report.records.extend(records);
    }
    for &variant in &cfg.sweep.variants {
        for &metric in &cfg.sweep.metrics {
            let id = curve_id(variant, metric);
            let mut points = Vec::new();
            for &n_t in &cfg.sweep.n_t {
                let values: Vec<f64> = report
                    .runs()
                    .filter(|r| r.curve_id == id && r.n_t == n_t)
                    .map(|r| r.value)
                    .collect();
                if !values.is_empty() {
                    points.push(CurvePoint {
                        x: n_t as f64,
                        y: mean_stderr(&values).0,
                    });
                }
            }
            let rec = match fit_log_law(&points) {
                Ok(fit) => Record::Fit(FitRecord::new(id, &fit, points.len())),
                Err(e) => {
                    log::warn!("curve {id}: fit skipped: {e}");
                    Record::FitSkipped {
                        curve_id: id,
                        reason: e.to_string(),
                    }
                }
            };
            report.push(rec);
        }
    }
    Ok(report)
}
