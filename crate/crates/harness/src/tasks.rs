//! Seeded synthetic tasks.

use kt_core::rng::substream;
use kt_core::theory::{gaussian_matrix, random_unit_map, LinearTaskParams};
use kt_core::{DataMatrix, LabeledDataset};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

const CENTERS: u64 = 1;
const SOURCE: u64 = 2;
const TARGET: u64 = 3;
const TEST: u64 = 4;
const SHIFT: u64 = 5;

/// Gaussian clusters in `dim` dimensions. Source class `k` is cluster `k`;
/// target class `j` merges the consecutive clusters
/// `j·g, …, j·g + g − 1` with `g = source_classes / target_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterTaskSpec {
    pub dim: usize,
    pub source_classes: usize,
    pub target_classes: usize,
    /// Expected norm of a cluster center.
    pub center_scale: f64,
    /// Per-coordinate noise standard deviation.
    pub noise: f64,
    pub n_source: usize,
    /// Size of the target training pool that sweeps subsample from.
    pub n_target_pool: usize,
    pub n_test: usize,
    /// Norm of the fixed offset added to every target point.
    pub shift: f64,
    /// Label source samples by target class instead of cluster.
    pub merged_source: bool,
}

impl Default for ClusterTaskSpec {
    fn default() -> Self {
        ClusterTaskSpec {
            dim: 64,
            source_classes: 50,
            target_classes: 10,
            center_scale: 4.0,
            noise: 0.5,
            n_source: 2000,
            n_target_pool: 200,
            n_test: 1000,
            shift: 0.0,
            merged_source: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationSplit {
    pub data: LabeledDataset,
    pub labels: Vec<usize>,
}

impl ClassificationSplit {
    fn new(x: DataMatrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let y = DataMatrix::one_hot(&labels, classes)?;
        Ok(ClassificationSplit {
            data: LabeledDataset::new(x, y)?,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> ClassificationSplit {
        ClassificationSplit {
            data: self.data.subset(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterTask {
    pub source: ClassificationSplit,
    pub target_pool: ClassificationSplit,
    pub target_test: ClassificationSplit,
}

impl ClusterTaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(format!("cluster task: {m}")));
        if self.dim == 0 || self.target_classes == 0 {
            return bad("dim and target_classes must be positive");
        }
        if !self.source_classes.is_multiple_of(self.target_classes) || self.source_classes == 0 {
            return bad("source_classes must be a positive multiple of target_classes");
        }
        if !(self.noise >= 0.0 && self.center_scale > 0.0 && self.shift >= 0.0) {
            return bad("scales must be non-negative and center_scale positive");
        }
        if self.n_source == 0 || self.n_target_pool == 0 || self.n_test == 0 {
            return bad("sample counts must be positive");
        }
        Ok(())
    }

    fn group(&self) -> usize {
        self.source_classes / self.target_classes
    }

    pub fn generate(&self, seed: u64) -> Result<ClusterTask> {
        self.validate()?;
        let d = self.dim;
        let mut rng = substream(seed, &[CENTERS]);
        let centers = gaussian_matrix(d, self.source_classes, &mut rng) * (self.center_scale / (d as f64).sqrt());
        let offset = if self.shift > 0.0 {
            let v = gaussian_matrix(d, 1, &mut substream(seed, &[SHIFT]));
            let n = v.norm();
            v * (self.shift / n)
        } else {
            DMatrix::zeros(d, 1)
        };
        let offset = DVector::from_column_slice(offset.as_slice());
        let draw = |stream: u64, n: usize, shift: bool| -> (DMatrix<f64>, Vec<usize>) {
            let mut rng = substream(seed, &[stream]);
            let clusters: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.source_classes)).collect();
            let mut x = gaussian_matrix(d, n, &mut rng) * self.noise;
            for (j, &k) in clusters.iter().enumerate() {
                let mut col = x.column_mut(j);
                col += centers.column(k);
                if shift {
                    col += &offset;
                }
            }
            (x, clusters)
        };
        let g = self.group();
        let (xs, ks) = draw(SOURCE, self.n_source, false);
        let source = if self.merged_source {
            let labels = ks.iter().map(|k| k / g).collect();
            ClassificationSplit::new(DataMatrix::new(xs)?, labels, self.target_classes)?
        } else {
            ClassificationSplit::new(DataMatrix::new(xs)?, ks, self.source_classes)?
        };
        let (xt, kt) = draw(TARGET, self.n_target_pool, true);
        let (xe, ke) = draw(TEST, self.n_test, true);
        let merge = |ks: Vec<usize>| ks.into_iter().map(|k| k / g).collect::<Vec<_>>();
        Ok(ClusterTask {
            source,
            target_pool: ClassificationSplit::new(DataMatrix::new(xt)?, merge(kt), self.target_classes)?,
            target_test: ClassificationSplit::new(DataMatrix::new(xe)?, merge(ke), self.target_classes)?,
        })
    }
}

/// Noiseless linear source and target maps with unit Frobenius norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearTaskSpec {
    pub dim: usize,
    pub source_outputs: usize,
    pub target_outputs: usize,
    pub n_source: usize,
    pub n_target_pool: usize,
    /// When set, `ω_s = ω_t + similarity_noise · u` for a unit `u`,
    /// otherwise `ω_s` is drawn independently.
    pub similarity_noise: Option<f64>,
}

impl Default for LinearTaskSpec {
    fn default() -> Self {
        LinearTaskSpec {
            dim: 32,
            source_outputs: 3,
            target_outputs: 3,
            n_source: 16,
            n_target_pool: 28,
            similarity_noise: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearTask {
    pub params: LinearTaskParams,
    pub source: LabeledDataset,
    pub target_pool: LabeledDataset,
}

impl LinearTaskSpec {
    pub fn generate(&self, seed: u64) -> Result<LinearTask> {
        let d = self.dim;
        let mut rng = substream(seed, &[CENTERS]);
        let wt = random_unit_map(self.target_outputs, d, &mut rng);
        let ws = match self.similarity_noise {
            Some(s) => {
                if self.source_outputs != self.target_outputs {
                    return Err(HarnessError::Config(
                        "similarity_noise needs equal source and target outputs".into(),
                    ));
                }
                &wt + random_unit_map(self.target_outputs, d, &mut rng) * s
            }
            None => random_unit_map(self.source_outputs, d, &mut rng),
        };
        let xs = gaussian_matrix(d, self.n_source, &mut substream(seed, &[SOURCE]));
        let xt = gaussian_matrix(d, self.n_target_pool, &mut substream(seed, &[TARGET]));
        let source = LabeledDataset::new(DataMatrix::new(xs.clone())?, DataMatrix::new(&ws * &xs)?)?;
        let target_pool = LabeledDataset::new(DataMatrix::new(xt.clone())?, DataMatrix::new(&wt * &xt)?)?;
        let params = LinearTaskParams::new(self.n_source.min(d), self.n_target_pool.min(d), ws, wt)?;
        Ok(LinearTask {
            params,
            source,
            target_pool,
        })
    }
}
