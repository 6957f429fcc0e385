//! Kernel (ridge) regression and minimum-norm linear least squares.
//!
//! A trained [`KernelModel`] predicts `f(x) = α K(X, x)` where the
//! coefficients `α` (`c × n`) satisfy `α (K_n + λI) = Y`. With `λ > 0` the
//! system is solved by Cholesky; with `λ = 0` the minimum-Frobenius-norm
//! solution `Y K_n†` is used, which coincides with the exact solve whenever
//! `K_n` is nonsingular.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, gram_symmetric, KernelSpec};
use crate::linalg::{self, conjugate_gradient};
use crate::matrix::{DataMatrix, LabeledDataset};
use crate::par::{self, Execution};

/// Ridge used by the experiment drivers when none is configured.
pub const DEFAULT_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Cholesky,
    PseudoInverse,
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub solver: Solver,
    pub converged: bool,
    /// CG iterations per output row; empty for direct solvers.
    pub iterations: Vec<usize>,
    /// Largest `‖y_i − α_i(K + λI)‖ / ‖y_i‖` over output rows.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    spec: KernelSpec,
    support: DataMatrix,
    alpha: DataMatrix,
    ridge: f64,
    report: TrainingReport,
}

impl KernelModel {
    /// Assembles a model from explicit coefficients, e.g. a frozen source
    /// model loaded from disk.
    pub fn from_parts(
        spec: KernelSpec,
        support: DataMatrix,
        alpha: DataMatrix,
        ridge: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if alpha.samples() != support.samples() {
            return Err(Error::dims(format!(
                "{} coefficient columns for {} support points",
                alpha.samples(),
                support.samples()
            )));
        }
        check_ridge(ridge)?;
        Ok(KernelModel {
            spec,
            support,
            alpha,
            ridge,
            report: TrainingReport {
                solver: Solver::Cholesky,
                converged: true,
                iterations: Vec::new(),
                relative_residual: 0.0,
            },
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn support(&self) -> &DataMatrix {
        &self.support
    }

    pub fn alpha(&self) -> &DataMatrix {
        &self.alpha
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn report(&self) -> &TrainingReport {
        &self.report
    }

    pub fn input_dim(&self) -> usize {
        self.support.dim()
    }

    pub fn output_dim(&self) -> usize {
        self.alpha.dim()
    }

    pub fn predict(&self, x: &DataMatrix) -> Result<DataMatrix> {
        predict(self, x)
    }

    /// `‖Y − f(X)‖_F` on a labelled set, typically the training set.
    pub fn residual(&self, data: &LabeledDataset) -> Result<f64> {
        let pred = self.predict(&data.x)?;
        Ok((data.y.as_matrix() - pred.as_matrix()).norm())
    }

    /// The explicit weight matrix `α Xᵀ` of a linear-kernel model.
    pub fn linear_weights(&self) -> Option<LinearWeights> {
        match self.spec {
            KernelSpec::Linear => Some(LinearWeights(
                self.alpha.as_matrix() * self.support.as_matrix().transpose(),
            )),
            _ => None,
        }
    }
}

fn check_ridge(ridge: f64) -> Result<()> {
    if ridge >= 0.0 && ridge.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("ridge must be finite and >= 0, got {ridge}")))
    }
}

fn check_training(spec: &KernelSpec, data: &LabeledDataset, ridge: f64) -> Result<()> {
    spec.validate()?;
    check_ridge(ridge)?;
    if data.is_empty() {
        return Err(Error::invalid("cannot fit a kernel model on zero samples"));
    }
    if data.y.samples() != data.x.samples() {
        return Err(Error::dims("label and feature sample counts differ"));
    }
    Ok(())
}

fn with_ridge(k: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let mut a = k.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += ridge;
    }
    a
}

fn row_residuals(system: &DMatrix<f64>, alpha: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let fitted = alpha * system;
    (0..y.nrows())
        .map(|i| {
            let yn = y.row(i).norm();
            let rn = (y.row(i) - fitted.row(i)).norm();
            if yn > 0.0 {
                rn / yn
            } else {
                rn
            }
        })
        .fold(0.0, f64::max)
}

/// Direct solve of `α (K_n + λI) = Y`.
pub fn fit_exact(spec: &KernelSpec, data: &LabeledDataset, ridge: f64) -> Result<KernelModel> {
    check_training(spec, data, ridge)?;
    let k = gram_symmetric(spec, &data.x)?;
    let system = with_ridge(&k, ridge);
    // K is symmetric, so α = Y A⁻¹ is the transpose of A⁻¹ Yᵀ.
    let rhs = data.y.transpose();
    let (alpha_t, solver) = if ridge > 0.0 {
        match linalg::spd_solve(&system, &rhs) {
            Some(sol) => (sol, Solver::Cholesky),
            None => {
                log::warn!(
                    "Cholesky failed for n = {} at ridge {ridge:e}; using the pseudo-inverse",
                    data.len()
                );
                (linalg::pinv(&system) * &rhs, Solver::PseudoInverse)
            }
        }
    } else {
        (linalg::pinv(&system) * &rhs, Solver::PseudoInverse)
    };
    let alpha = alpha_t.transpose();
    let relative_residual = row_residuals(&system, &alpha, data.y.as_matrix());
    Ok(KernelModel {
        spec: *spec,
        support: data.x.clone(),
        alpha: DataMatrix::new(alpha)?,
        ridge,
        report: TrainingReport {
            solver,
            converged: true,
            iterations: Vec::new(),
            relative_residual,
        },
    })
}

/// Conjugate-gradient solve of `(K_n + λI) α_iᵀ = y_iᵀ`, one system per
/// output row. A model is always returned; check `report().converged`.
pub fn fit_iterative(
    spec: &KernelSpec,
    data: &LabeledDataset,
    ridge: f64,
    tol: f64,
    max_iter: usize,
) -> Result<KernelModel> {
    fit_iterative_with(spec, data, ridge, tol, max_iter, Execution::Parallel)
}

pub fn fit_iterative_with(
    spec: &KernelSpec,
    data: &LabeledDataset,
    ridge: f64,
    tol: f64,
    max_iter: usize,
    exec: Execution,
) -> Result<KernelModel> {
    check_training(spec, data, ridge)?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("CG tolerance must be positive, got {tol}")));
    }
    let k = gram_symmetric(spec, &data.x)?;
    if ridge == 0.0 {
        let cond = linalg::symmetric_condition(&k);
        if !(cond < 1.0 / f64::EPSILON.sqrt()) {
            return Err(Error::Numeric(format!(
                "Gram matrix condition number {cond:e} is too large for unregularized CG"
            )));
        }
    }
    let y = data.y.as_matrix();
    let outcomes = par::map_range(exec, y.nrows(), |i| {
        let b = DVector::from_iterator(y.ncols(), y.row(i).iter().copied());
        conjugate_gradient(&k, ridge, &b, tol, max_iter)
    });
    let mut alpha = DMatrix::zeros(y.nrows(), y.ncols());
    let mut iterations = Vec::with_capacity(y.nrows());
    let mut converged = true;
    let mut relative_residual = 0.0f64;
    for (i, out) in outcomes.into_iter().enumerate() {
        let out = out?;
        alpha.row_mut(i).copy_from(&out.x.transpose());
        iterations.push(out.iterations);
        converged &= out.converged;
        relative_residual = relative_residual.max(out.relative_residual);
    }
    if !converged {
        log::warn!(
            "CG did not reach tol {tol:e} within {max_iter} iterations (residual {relative_residual:e})"
        );
    }
    Ok(KernelModel {
        spec: *spec,
        support: data.x.clone(),
        alpha: DataMatrix::new(alpha)?,
        ridge,
        report: TrainingReport {
            solver: Solver::ConjugateGradient,
            converged,
            iterations,
            relative_residual,
        },
    })
}

/// `α K(X_support, X)`, one output column per query column.
pub fn predict(model: &KernelModel, x: &DataMatrix) -> Result<DataMatrix> {
    if x.dim() != model.input_dim() {
        return Err(Error::dims(format!(
            "model expects {}-dim inputs, got {}",
            model.input_dim(),
            x.dim()
        )));
    }
    let g = gram(&model.spec, &model.support, x)?;
    DataMatrix::new(model.alpha.as_matrix() * g)
}

/// A `c × d` linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWeights(pub DMatrix<f64>);

impl LinearWeights {
    pub fn apply(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        if x.dim() != self.0.ncols() {
            return Err(Error::dims(format!(
                "weights take {}-dim inputs, got {}",
                self.0.ncols(),
                x.dim()
            )));
        }
        Ok(&self.0 * x.as_matrix())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `W = Y X†`: the minimum-Frobenius-norm minimizer of `‖Y − W X‖_F`.
pub fn min_norm_linear(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LinearWeights> {
    if x.ncols() != y.ncols() {
        return Err(Error::dims(format!(
            "{} feature columns but {} label columns",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(LinearWeights(y * linalg::pinv(x)))
}
