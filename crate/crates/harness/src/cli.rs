//! The `kt` command line.
//!
//! Exit codes: 0 when everything ran and passed, 1 for usage, config, or
//! input errors, 2 when a validation cell or sweep cell failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kt_core::scaling::{extrapolate, fit_log_law, prediction_gap, CurvePoint};
use kt_core::{
    fit_combined_scaled, fit_exact, fit_projected, fit_translated, DataMatrix, KernelModel,
    TransferModel,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MetricKind, Variant};
use crate::error::{HarnessError, Result};
use crate::experiment::{load_task_data, run_experiment};
use crate::io::{load_matrix_auto, write_csv};
use crate::report::{ExperimentReport, FitRecord, Record};
use crate::validation::run_theory_validation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kt", version, about = "Kernel transfer learning experiments")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides KT_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a kernel model on the source split and save it as JSON.
    Train {
        /// Features, overriding data.source_x.
        #[arg(long)]
        x: Option<PathBuf>,
        /// Labels, overriding data.source_y.
        #[arg(long)]
        y: Option<PathBuf>,
    },
    /// Adapt a saved source model to the target split.
    Transfer {
        #[arg(long)]
        source_model: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
    },
    /// Score a saved model on the test split.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Check closed-form risks against simulation.
    Theory,
    /// Fit y = a·log2(x) + b to a curve and extrapolate.
    Scaling {
        /// CSV with x,y rows.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run a sample-size sweep.
    Experiment,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown variant {s:?}"))
}

/// On-disk model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Kernel(KernelModel),
    Transfer(TransferModel),
}

impl SavedModel {
    pub fn predict(&self, x: &DataMatrix) -> kt_core::Result<DataMatrix> {
        match self {
            SavedModel::Kernel(m) => m.predict(x),
            SavedModel::Transfer(m) => m.predict(x),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::parse(path, format!("line {}", e.line()), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("models serialize");
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) {
    if threads.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; running on one thread");
    }
}

fn out_path(cli: &Cli, cfg: &ExperimentConfig, default: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

pub fn run(cli: &Cli) -> Result<i32> {
    let mut cfg = load_config(cli)?;
    configure_threads(cfg.threads);
    let seed = cfg.master_seed(cli.seed)?;
    match &cli.command {
        Command::Train { x, y } => {
            if x.is_some() {
                cfg.data.source_x = x.clone();
            }
            if y.is_some() {
                cfg.data.source_y = y.clone();
            }
            let mut data_cfg = cfg.data.clone();
            // Reuse the loader with the source split as the target pool.
            data_cfg.target_x = data_cfg.source_x.take();
            data_cfg.target_y = data_cfg.source_y.take();
            data_cfg.test_x = None;
            data_cfg.test_y = None;
            let data = load_task_data(&data_cfg)?;
            let model = fit_exact(&cfg.kernels.source, &data.target_pool, cfg.ridge.source)?;
            let path = out_path(cli, &cfg, "model.json");
            SavedModel::Kernel(model).save(&path)?;
            println!("trained on {} samples; model written to {}", data.target_pool.len(), path.display());
            Ok(EXIT_OK)
        }
        Command::Transfer { source_model, variant } => {
            let src_path = source_model
                .clone()
                .or_else(|| cfg.transfer.source_model.clone())
                .ok_or_else(|| HarnessError::Usage("transfer needs --source-model or transfer.source_model".into()))?;
            let SavedModel::Kernel(source) = SavedModel::load(&src_path)? else {
                return Err(HarnessError::Usage("the source model must be a plain kernel model".into()));
            };
            let mut data_cfg = cfg.data.clone();
            data_cfg.source_x = None;
            data_cfg.source_y = None;
            data_cfg.test_x = None;
            data_cfg.test_y = None;
            let data = load_task_data(&data_cfg)?;
            let target = &data.target_pool;
            let (k, r) = (&cfg.kernels, &cfg.ridge);
            let model = match variant.unwrap_or(cfg.transfer.variant) {
                Variant::Projected => fit_projected(&source, target, &k.head, r.head)?,
                Variant::Translated => fit_translated(&source, target, &k.correction, r.correction)?,
                Variant::Combined => fit_combined_scaled(&source, target, &k.head, r.head, cfg.transfer.scales)?,
                v => {
                    return Err(HarnessError::Usage(format!(
                        "variant {} is not a transfer variant",
                        v.name()
                    )))
                }
            };
            let path = out_path(cli, &cfg, "transfer.json");
            let name = model.variant_name();
            SavedModel::Transfer(model).save(&path)?;
            println!("{name} model fit on {} target samples; written to {}", target.len(), path.display());
            Ok(EXIT_OK)
        }
        Command::Eval { model } => {
            let path = model
                .clone()
                .or_else(|| cfg.eval.model.clone())
                .ok_or_else(|| HarnessError::Usage("eval needs --model or eval.model".into()))?;
            let model = SavedModel::load(&path)?;
            let mut data_cfg = cfg.data.clone();
            data_cfg.source_x = None;
            data_cfg.source_y = None;
            data_cfg.target_x = data_cfg.test_x.clone();
            data_cfg.target_y = data_cfg.test_y.clone();
            let data = load_task_data(&data_cfg)?;
            let pred = model.predict(&data.target_pool.x)?;
            let mut lines = String::new();
            for &metric in &cfg.eval.metrics {
                let (value, excluded) = match metric {
                    MetricKind::Accuracy => {
                        let labels = data
                            .test_labels
                            .as_ref()
                            .ok_or_else(|| HarnessError::Config("accuracy needs integer test labels".into()))?;
                        (kt_core::accuracy(&pred, labels)?, 0)
                    }
                    MetricKind::PearsonR => (kt_core::pearson_r(&pred, &data.target_pool.y)?, 0),
                    MetricKind::MeanR2 => {
                        let m = kt_core::mean_r2(&pred, &data.target_pool.y)?;
                        (m.value, m.excluded)
                    }
                    MetricKind::MeanCosine => {
                        let m = kt_core::mean_cosine(&pred, &data.target_pool.y, data.test_groups.as_deref())?;
                        (m.value, m.excluded)
                    }
                    MetricKind::Risk => {
                        return Err(HarnessError::Usage("the risk metric is only available in experiments".into()))
                    }
                };
                println!("{}: {value}", metric.name());
                lines.push_str(
                    &serde_json::json!({"metric": metric.name(), "value": value, "excluded": excluded}).to_string(),
                );
                lines.push('\n');
            }
            if let Some(p) = cli.out.clone().or(cfg.out.clone()) {
                fs::write(&p, lines).map_err(|e| HarnessError::io(&p, e))?;
            }
            Ok(EXIT_OK)
        }
        Command::Theory => {
            let report = run_theory_validation(&cfg.theory, seed)?;
            let dir = out_path(cli, &cfg, "theory-report");
            report.write(&dir)?;
            print_theory_summary(&report);
            println!("report written to {} (digest {})", dir.display(), report.digest());
            Ok(if report.any_failure() { EXIT_FAILED } else { EXIT_OK })
        }
        Command::Scaling { input } => {
            let path = input
                .clone()
                .or_else(|| cfg.scaling.input.clone())
                .ok_or_else(|| HarnessError::Usage("scaling needs --input or scaling.input".into()))?;
            let m = load_matrix_auto(&path)?;
            if m.dim() != 2 {
                return Err(HarnessError::parse(&path, "line 1", "expected two columns x,y"));
            }
            let points = (0..m.samples())
                .map(|j| CurvePoint::new(m[(0, j)], m[(1, j)]))
                .collect::<kt_core::Result<Vec<_>>>()?;
            let k = cfg.scaling.fit_points.unwrap_or(points.len()).min(points.len());
            let fit = fit_log_law(&points[..k])?;
            println!("a = {}, b = {}, r² = {}", fit.a, fit.b, fit.r_squared_label());
            let mut report = ExperimentReport::default();
            report.push(Record::Fit(FitRecord::new("input".into(), &fit, k)));
            let mut rows = Vec::new();
            for p in &points[k..] {
                let y = extrapolate(&fit, p.x)?;
                let gap = prediction_gap(y, p.y);
                println!(
                    "x = {}: predicted {y}, observed {}, gap {} absolute, {} relative",
                    p.x, p.y, gap.absolute, gap.relative
                );
                rows.push([p.x, y, p.y]);
            }
            for &x in &cfg.scaling.extrapolate_to {
                let y = extrapolate(&fit, x)?;
                println!("x = {x}: predicted {y}");
                rows.push([x, y, f64::NAN]);
            }
            if let Some(p) = cli.out.clone().or(cfg.out.clone()) {
                let m = nalgebra::DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
                let header = ["x", "predicted", "observed"].map(String::from);
                write_csv(&p, &m, Some(&header))?;
            }
            Ok(EXIT_OK)
        }
        Command::Experiment => {
            let report = run_experiment(&cfg, seed)?;
            let dir = out_path(cli, &cfg, "experiment-report");
            report.write(&dir)?;
            let failures = report.records.iter().filter(|r| matches!(r, Record::Failure(_))).count();
            println!(
                "{} runs, {} failed cells; report written to {} (digest {})",
                report.runs().count(),
                failures,
                dir.display(),
                report.digest()
            );
            Ok(if failures > 0 { EXIT_FAILED } else { EXIT_OK })
        }
    }
}

fn print_theory_summary(report: &ExperimentReport) {
    let mut groups: std::collections::BTreeMap<String, (usize, usize)> = Default::default();
    for r in report.records.iter().filter(|r| r.is_validation()) {
        let key = match r {
            Record::Risk(c) => c.predictor.clone(),
            Record::Moment(_) => "moment".into(),
            Record::Asymptotic(_) => "asymptotic".into(),
            Record::Identity(_) => "identity".into(),
            Record::Regime(_) => "regime".into(),
            _ => unreachable!(),
        };
        let e = groups.entry(key).or_default();
        e.1 += 1;
        if !r.failed() {
            e.0 += 1;
        }
    }
    for (k, (pass, total)) in groups {
        println!("{k}: {pass}/{total} cells pass");
    }
}
