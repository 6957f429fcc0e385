//! Transfer learning for kernel machines.
//!
//! A source kernel model trained on one task is adapted to a target task by
//! *projection* (a second model fit on the source model's outputs),
//! *translation* (an additive correction fit on the target residuals), or a
//! combination of both. The [`theory`] module carries the closed-form risk
//! expressions for the linear special case along with Monte Carlo oracles
//! that check them.
//!
//! Matrices follow the column-per-sample convention throughout: a dataset of
//! `n` points in `d` dimensions is a `d × n` [`DataMatrix`], and labels are
//! `c × n`.
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod regression;
pub mod rng;
pub mod scaling;
pub mod theory;
pub mod transfer;

pub use error::{Error, Result};
pub use kernels::{gram, gram_symmetric, kappa0, kappa1, kernel_eval, GramOptions, KernelSpec};
pub use matrix::{DataMatrix, LabeledDataset};
pub use par::Execution;
pub use regression::{
    fit_exact, fit_iterative, min_norm_linear, predict, KernelModel, LinearWeights, Solver,
    TrainingReport,
};
pub use metrics::{accuracy, mean_cosine, mean_r2, pearson_r, SampleMean};
pub use scaling::{extrapolate, fit_log_law, CurvePoint, ScalingFit};
pub use transfer::{
    fit_combined, fit_combined_scaled, fit_projected, fit_translated, predict_transfer,
    BlockScales, TransferModel,
};
