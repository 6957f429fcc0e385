//! TOML configuration shared by every subcommand.
//!
//! Every section is optional and falls back to its defaults. The master seed
//! is resolved as: `--seed` flag, then the `KT_SEED` environment variable,
//! then the `seed` key, then 0.

use std::path::{Path, PathBuf};

use kt_core::kernels::DEFAULT_LAPLACE_BANDWIDTH;
use kt_core::regression::DEFAULT_RIDGE;
use kt_core::{BlockScales, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::tasks::{ClusterTaskSpec, LinearTaskSpec};

pub const SEED_ENV: &str = "KT_SEED";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub kernels: KernelConfig,
    pub ridge: RidgeConfig,
    pub data: DataConfig,
    pub synthetic: Option<SyntheticTask>,
    pub transfer: TransferConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
    pub theory: TheoryConfig,
    pub scaling: ScalingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub source: KernelSpec,
    pub head: KernelSpec,
    pub correction: KernelSpec,
}

impl Default for KernelConfig {
    fn default() -> Self {
        let l = KernelSpec::Laplace {
            bandwidth: DEFAULT_LAPLACE_BANDWIDTH,
        };
        KernelConfig {
            source: l,
            head: l,
            correction: l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeConfig {
    pub source: f64,
    pub head: f64,
    pub correction: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            source: DEFAULT_RIDGE,
            head: DEFAULT_RIDGE,
            correction: DEFAULT_RIDGE,
        }
    }
}

/// Matrix files; `.csv` is read as CSV and anything else as `KTM1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source_x: Option<PathBuf>,
    pub source_y: Option<PathBuf>,
    pub target_x: Option<PathBuf>,
    pub target_y: Option<PathBuf>,
    pub test_x: Option<PathBuf>,
    pub test_y: Option<PathBuf>,
    /// Per-sample group ids for centred cosine similarity.
    pub test_groups: Option<PathBuf>,
    /// Label files hold one integer class per row, one-hot encoded on load.
    pub classification: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source_x: None,
            source_y: None,
            target_x: None,
            target_y: None,
            test_x: None,
            test_y: None,
            test_groups: None,
            classification: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticTask {
    Clusters(ClusterTaskSpec),
    Linear(LinearTaskSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Trained on the target subsample alone.
    Baseline,
    /// The source model applied to target inputs.
    Source,
    Projected,
    Translated,
    Combined,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Source => "source",
            Variant::Projected => "projected",
            Variant::Translated => "translated",
            Variant::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    PearsonR,
    MeanR2,
    MeanCosine,
    /// `‖W − ω_t‖_F²` for linear models on the synthetic linear task.
    Risk,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::PearsonR => "pearson_r",
            MetricKind::MeanR2 => "mean_r2",
            MetricKind::MeanCosine => "mean_cosine",
            MetricKind::Risk => "risk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub variant: Variant,
    /// Saved source model used by the `transfer` subcommand.
    pub source_model: Option<PathBuf>,
    pub scales: BlockScales,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            variant: Variant::Projected,
            source_model: None,
            scales: BlockScales::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub model: Option<PathBuf>,
    pub metrics: Vec<MetricKind>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            model: None,
            metrics: vec![MetricKind::Accuracy],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Strictly increasing target sample counts.
    pub n_t: Vec<usize>,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub metrics: Vec<MetricKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_t: vec![50, 100, 200],
            seeds: vec![0, 1, 2],
            variants: vec![Variant::Baseline, Variant::Projected],
            metrics: vec![MetricKind::Accuracy],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub checks: Vec<TheoryCheck>,
    pub d: usize,
    pub n_s: Vec<usize>,
    pub n_t: Vec<usize>,
    pub c_s: Vec<usize>,
    pub c_t: usize,
    /// Output count shared by source and target in the translated grid.
    pub translated_outputs: usize,
    /// Random `(ω_s, ω_t)` pairs per grid point.
    pub draws_per_cell: usize,
    pub trials: usize,
    /// Agreement band in standard errors.
    pub band: f64,
    /// Absolute slack for cells whose exact risk is zero.
    pub floor: f64,
    /// One rerun with a fresh seed for a failing cell.
    pub retry: bool,
    pub moment: MomentConfig,
    pub asymptotic: AsymptoticConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryCheck {
    Projected,
    Translated,
    Baseline,
    Moment,
    Asymptotic,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            checks: vec![
                TheoryCheck::Projected,
                TheoryCheck::Translated,
                TheoryCheck::Baseline,
                TheoryCheck::Moment,
                TheoryCheck::Asymptotic,
            ],
            d: 32,
            n_s: vec![8, 16, 32],
            n_t: vec![4, 16, 28],
            c_s: vec![2, 8],
            c_t: 3,
            translated_outputs: 4,
            draws_per_cell: 5,
            trials: 2000,
            band: 4.0,
            floor: 1e-12,
            retry: true,
            moment: MomentConfig::default(),
            asymptotic: AsymptoticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub d: usize,
    /// `(p, q)` rank pairs.
    pub cells: Vec<(usize, usize)>,
    pub draws: usize,
    pub band: f64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig {
            d: 16,
            cells: vec![(16, 3), (5, 3), (5, 0), (1, 16)],
            draws: 20_000,
            band: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticConfig {
    pub d: usize,
    /// Values used for each of `S`, `T`, `C`.
    pub grid: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// The finite-`d` gap must stay below `bound_constant / d`.
    pub bound_constant: f64,
}

impl Default for AsymptoticConfig {
    fn default() -> Self {
        AsymptoticConfig {
            d: 1024,
            grid: vec![0.1, 0.5, 0.9],
            epsilons: vec![0.0, 0.3],
            bound_constant: 5.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    /// CSV with `x,y` rows (header optional).
    pub input: Option<PathBuf>,
    /// Fit on this many leading points; all points when unset.
    pub fit_points: Option<usize>,
    pub extrapolate_to: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative data paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        let d = &mut self.data;
        for p in [
            &mut d.source_x,
            &mut d.source_y,
            &mut d.target_x,
            &mut d.target_y,
            &mut d.test_x,
            &mut d.test_y,
            &mut d.test_groups,
            &mut self.transfer.source_model,
            &mut self.eval.model,
            &mut self.scaling.input,
        ] {
            fix(p);
        }
    }

    /// Flag, then environment, then file, then 0.
    pub fn master_seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(self.seed.unwrap_or(0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for spec in [self.kernels.source, self.kernels.head, self.kernels.correction] {
            spec.validate()?;
        }
        for r in [self.ridge.source, self.ridge.head, self.ridge.correction] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(HarnessError::Config(format!("ridge must be finite and >= 0, got {r}")));
            }
        }
        if self.sweep.n_t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config("sweep.n_t must be strictly increasing".into()));
        }
        if self.sweep.n_t.first() == Some(&0) {
            return Err(HarnessError::Config("sweep.n_t values must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(HarnessError::Config("threads must be positive".into()));
        }
        let t = &self.theory;
        if t.trials < 2 || t.moment.draws < 2 {
            return Err(HarnessError::Config("theory trials and moment draws must be at least 2".into()));
        }
        if t.d < 2 || t.n_s.iter().chain(&t.n_t).any(|&n| n > t.d) {
            return Err(HarnessError::Config("theory grid needs d >= 2 and sample counts <= d".into()));
        }
        Ok(())
    }
}
