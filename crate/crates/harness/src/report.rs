//! Experiment reports: JSON-lines records, the plot CSV, and a digest that
//! ignores wall-time fields.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use kt_core::scaling::ScalingFit;
use kt_core::theory::RegimeReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// JSON keys holding timings; dropped before hashing or comparing reports.
pub const TIMING_KEYS: &[&str] = &["wall_time_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Run(RunRecord),
    Failure(FailureRecord),
    Fit(FitRecord),
    FitSkipped { curve_id: String, reason: String },
    Risk(RiskCell),
    Moment(MomentCell),
    Asymptotic(AsymptoticCell),
    Identity(IdentityCell),
    Regime(RegimeCell),
}

impl Record {
    /// Whether the record is a validation cell that failed.
    pub fn failed(&self) -> bool {
        match self {
            Record::Risk(c) => !c.passed,
            Record::Moment(c) => !c.passed,
            Record::Asymptotic(c) => !c.passed,
            Record::Identity(c) => !c.passed,
            Record::Regime(c) => !c.passed,
            Record::Failure(_) => true,
            _ => false,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Record::Risk(_) | Record::Moment(_) | Record::Asymptotic(_) | Record::Identity(_) | Record::Regime(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub curve_id: String,
    pub variant: String,
    pub n_s: usize,
    pub n_t: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    /// Samples dropped as degenerate by per-sample metrics.
    pub excluded: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub variant: String,
    pub n_t: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub curve_id: String,
    pub a: f64,
    pub b: f64,
    /// `None` when the coefficient of determination is undefined.
    pub r_squared: Option<f64>,
    pub points: usize,
}

impl FitRecord {
    pub fn new(curve_id: String, fit: &ScalingFit, points: usize) -> Self {
        FitRecord {
            curve_id,
            a: fit.a,
            b: fit.b,
            r_squared: fit.r_squared_defined().then_some(fit.r_squared),
            points,
        }
    }
}

/// Closed form against simulation for one linear task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCell {
    pub predictor: String,
    pub cell: usize,
    pub d: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub c_s: usize,
    pub c_t: usize,
    pub draw: String,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub trials: usize,
    pub z_score: f64,
    pub retried: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCell {
    pub d: usize,
    pub p: usize,
    pub q: usize,
    /// Zero for the analytic `p = d` check.
    pub draws: usize,
    pub max_abs_diff: f64,
    /// Largest entrywise `|MC − closed form| / stderr`; `None` when analytic.
    pub max_z: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCell {
    pub d: usize,
    pub n_s: usize,
    pub n_t: usize,
    pub c_s: usize,
    pub s: f64,
    pub t: f64,
    pub c: f64,
    pub epsilon: f64,
    pub finite_d: f64,
    pub asymptotic: f64,
    /// `|finite_d − asymptotic| / ‖ω_t‖²`.
    pub gap: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCell {
    pub name: String,
    pub t: f64,
    pub c: f64,
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCell {
    pub report: RegimeReport,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<Record>,
}

/// Per-curve aggregate row of the plot CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub curve_id: String,
    pub n_t: usize,
    pub mean: f64,
    pub stderr: f64,
    pub fit: Option<FitRecord>,
}

impl ExperimentReport {
    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Run(run) => Some(run),
            _ => None,
        })
    }

    pub fn fits(&self) -> impl Iterator<Item = &FitRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Fit(f) => Some(f),
            _ => None,
        })
    }

    pub fn validation_failures(&self) -> usize {
        self.records.iter().filter(|r| r.is_validation() && r.failed()).count()
    }

    pub fn any_failure(&self) -> bool {
        self.records.iter().any(Record::failed)
    }

    /// One JSON object per line, in record order.
    pub fn to_jsonl(&self, include_timing: bool) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mut v = serde_json::to_value(r).expect("records serialize");
            if !include_timing {
                strip_timing(&mut v);
            }
            out.push_str(&serde_json::to_string(&v).expect("values serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| {
                    HarnessError::parse("report", format!("line {}", i + 1), e.to_string())
                })
            })
            .collect::<Result<_>>()?;
        Ok(ExperimentReport { records })
    }

    /// SHA-256 of the report with timing fields removed.
    pub fn digest(&self) -> String {
        hex_digest(self.to_jsonl(false).as_bytes())
    }

    /// Run records grouped by curve and `n_t`, in sorted order.
    pub fn curve_rows(&self) -> Vec<CurveRow> {
        let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for r in self.runs() {
            groups.entry((r.curve_id.clone(), r.n_t)).or_default().push(r.value);
        }
        let fits: BTreeMap<&str, &FitRecord> = self.fits().map(|f| (f.curve_id.as_str(), f)).collect();
        groups
            .into_iter()
            .map(|((curve_id, n_t), values)| {
                let (mean, stderr) = mean_stderr(&values);
                let fit = fits.get(curve_id.as_str()).map(|f| (*f).clone());
                CurveRow {
                    curve_id,
                    n_t,
                    mean,
                    stderr,
                    fit,
                }
            })
            .collect()
    }

    /// Plot CSV with columns `curve_id,n_t,mean,stderr,fit_a,fit_b,fit_r2`.
    /// Fit columns are empty when no fit exists; an undefined `r²` is
    /// written as `undefined`.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("curve_id,n_t,mean,stderr,fit_a,fit_b,fit_r2\n");
        for row in self.curve_rows() {
            let (a, b, r2) = match &row.fit {
                Some(f) => (
                    f.a.to_string(),
                    f.b.to_string(),
                    f.r_squared.map_or("undefined".to_string(), |v| v.to_string()),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.curve_id, row.n_t, row.mean, row.stderr, a, b, r2
            ));
        }
        out
    }

    /// Writes `report.jsonl`, `curves.csv` and `digest.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let files = [
            ("report.jsonl", self.to_jsonl(true)),
            ("curves.csv", self.plot_csv()),
            ("digest.txt", format!("{}\n", self.digest())),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| HarnessError::io(&p, e))?;
        }
        Ok(())
    }
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn strip_timing(v: &mut serde_json::Value) {
    if let serde_json::Value::Object(map) = v {
        for k in TIMING_KEYS {
            map.remove(*k);
        }
        for child in map.values_mut() {
            strip_timing(child);
        }
    }
}

/// Removes timing fields from each line of a JSON-lines report.
pub fn strip_timing_jsonl(text: &str) -> Result<String> {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut v: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| HarnessError::parse("report", format!("line {}", i + 1), e.to_string()))?;
        strip_timing(&mut v);
        out.push_str(&v.to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(curve: &str, n_t: usize, seed: u64, value: f64, ms: f64) -> Record {
        Record::Run(RunRecord {
            curve_id: curve.into(),
            variant: "baseline".into(),
            n_s: 0,
            n_t,
            seed,
            metric: "accuracy".into(),
            value,
            excluded: 0,
            wall_time_ms: ms,
        })
    }

    #[test]
    fn digest_ignores_timing() {
        let a = ExperimentReport {
            records: vec![run("c", 10, 0, 0.5, 1.0)],
        };
        let b = ExperimentReport {
            records: vec![run("c", 10, 0, 0.5, 99.0)],
        };
        assert_ne!(a.to_jsonl(true), b.to_jsonl(true));
        assert_eq!(a.digest(), b.digest());
        assert_eq!(strip_timing_jsonl(&a.to_jsonl(true)).unwrap(), a.to_jsonl(false));
        let c = ExperimentReport {
            records: vec![run("c", 10, 0, 0.6, 1.0)],
        };
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut r = ExperimentReport::default();
        r.push(run("c", 10, 0, 0.1 + 0.2, 3.0));
        r.push(Record::FitSkipped {
            curve_id: "c".into(),
            reason: "one point".into(),
        });
        let back = ExperimentReport::from_jsonl(&r.to_jsonl(true)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn plot_rows_aggregate_seeds() {
        let mut r = ExperimentReport::default();
        r.push(run("b", 20, 0, 0.5, 0.0));
        r.push(run("b", 20, 1, 0.7, 0.0));
        r.push(run("b", 10, 0, 0.4, 0.0));
        r.push(Record::Fit(FitRecord {
            curve_id: "b".into(),
            a: 0.2,
            b: -0.3,
            r_squared: None,
            points: 2,
        }));
        let csv = r.plot_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "curve_id,n_t,mean,stderr,fit_a,fit_b,fit_r2");
        assert_eq!(lines[1], "b,10,0.4,0,0.2,-0.3,undefined");
        assert!(lines[2].starts_with("b,20,0.6"));
    }

    #[test]
    fn stderr_of_pair() {
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
