//! Transfer operators over a frozen source model.
//!
//! * **Projected**: a head model is trained on the source outputs
//!   `f_s(X_t)` against the target labels; prediction is `head(f_s(x))`.
//! * **Translated**: a correction model is trained on the residuals
//!   `y_t − f_s(X_t)`; prediction is `f_s(x) + correction(x)`.
//! * **Combined**: a head model is trained on the stacked inputs
//!   `[f_s(x) ; x]` (source block first, then raw features).
//!
//! Heads and corrections are fitted with [`fit_exact`], so at zero ridge
//! they are minimum-norm interpolants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::matrix::{DataMatrix, LabeledDataset};
use crate::regression::{fit_exact, KernelModel};

/// Multipliers applied to the two blocks of the combined head's input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockScales {
    pub source: f64,
    pub features: f64,
}

impl Default for BlockScales {
    fn default() -> Self {
        BlockScales {
            source: 1.0,
            features: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TransferModel {
    Projected {
        source: KernelModel,
        head: KernelModel,
    },
    Translated {
        source: KernelModel,
        correction: KernelModel,
    },
    Combined {
        source: KernelModel,
        head: KernelModel,
        scales: BlockScales,
    },
}

impl TransferModel {
    pub fn variant_name(&self) -> &'static str {
        match self {
            TransferModel::Projected { .. } => "projected",
            TransferModel::Translated { .. } => "translated",
            TransferModel::Combined { .. } => "combined",
        }
    }

    pub fn source(&self) -> &KernelModel {
        match self {
            TransferModel::Projected { source, .. }
            | TransferModel::Translated { source, .. }
            | TransferModel::Combined { source, .. } => source,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            TransferModel::Projected { head, .. } | TransferModel::Combined { head, .. } => {
                head.output_dim()
            }
            TransferModel::Translated { correction, .. } => correction.output_dim(),
        }
    }

    pub fn predict(&self, x: &DataMatrix) -> Result<DataMatrix> {
        predict_transfer(self, x)
    }
}

fn check_target(source: &KernelModel, target: &LabeledDataset) -> Result<()> {
    if target.is_empty() {
        return Err(Error::invalid("target training set is empty"));
    }
    if target.feature_dim() != source.input_dim() {
        return Err(Error::dims(format!(
            "source takes {}-dim inputs, target has {}",
            source.input_dim(),
            target.feature_dim()
        )));
    }
    if source.output_dim() == 0 {
        return Err(Error::invalid("source model has no outputs"));
    }
    Ok(())
}

fn stacked_inputs(source: &KernelModel, x: &DataMatrix, scales: BlockScales) -> Result<DataMatrix> {
    let fs = source.predict(x)?.into_inner() * scales.source;
    let raw = x.as_matrix() * scales.features;
    DataMatrix::vstack(&[&DataMatrix::new(fs)?, &DataMatrix::new(raw)?])
}

pub fn fit_projected(
    source: &KernelModel,
    target: &LabeledDataset,
    head_spec: &KernelSpec,
    ridge: f64,
) -> Result<TransferModel> {
    check_target(source, target)?;
    let features = source.predict(&target.x)?;
    let head = fit_exact(head_spec, &LabeledDataset::new(features, target.y.clone())?, ridge)?;
    Ok(TransferModel::Projected {
        source: source.clone(),
        head,
    })
}

pub fn fit_translated(
    source: &KernelModel,
    target: &LabeledDataset,
    corr_spec: &KernelSpec,
    ridge: f64,
) -> Result<TransferModel> {
    check_target(source, target)?;
    if source.output_dim() != target.label_dim() {
        return Err(Error::dims(format!(
            "translation needs equal label dimensions, source has {} and target {}",
            source.output_dim(),
            target.label_dim()
        )));
    }
    let fs = source.predict(&target.x)?;
    let residual = DataMatrix::new(target.y.as_matrix() - fs.as_matrix())?;
    let correction = fit_exact(corr_spec, &LabeledDataset::new(target.x.clone(), residual)?, ridge)?;
    Ok(TransferModel::Translated {
        source: source.clone(),
        correction,
    })
}

pub fn fit_combined(
    source: &KernelModel,
    target: &LabeledDataset,
    head_spec: &KernelSpec,
    ridge: f64,
) -> Result<TransferModel> {
    fit_combined_scaled(source, target, head_spec, ridge, BlockScales::default())
}

pub fn fit_combined_scaled(
    source: &KernelModel,
    target: &LabeledDataset,
    head_spec: &KernelSpec,
    ridge: f64,
    scales: BlockScales,
) -> Result<TransferModel> {
    check_target(source, target)?;
    if !(scales.source.is_finite() && scales.features.is_finite()) {
        return Err(Error::invalid("block scales must be finite"));
    }
    let inputs = stacked_inputs(source, &target.x, scales)?;
    let head = fit_exact(head_spec, &LabeledDataset::new(inputs, target.y.clone())?, ridge)?;
    Ok(TransferModel::Combined {
        source: source.clone(),
        head,
        scales,
    })
}

pub fn predict_transfer(model: &TransferModel, x: &DataMatrix) -> Result<DataMatrix> {
    match model {
        TransferModel::Projected { source, head } => head.predict(&source.predict(x)?),
        TransferModel::Translated { source, correction } => {
            let a = source.predict(x)?;
            let b = correction.predict(x)?;
            DataMatrix::new(a.into_inner() + b.into_inner())
        }
        TransferModel::Combined {
            source,
            head,
            scales,
        } => head.predict(&stacked_inputs(source, x, *scales)?),
    }
}
