//! Kernel functions and Gram matrix assembly.
//!
//! Three families are supported: the linear kernel `xᵀz`, the Laplace kernel
//! `exp(-‖x − z‖₂ / L)`, and the neural tangent kernel of an infinitely wide
//! fully connected ReLU network with `depth` hidden layers and a bias of
//! standard deviation `bias` at every layer.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::par::{self, Execution};

/// Cosine overshoot tolerated before clamping to `[-1, 1]`.
const COS_SLACK: f64 = 1e-9;

pub const DEFAULT_LAPLACE_BANDWIDTH: f64 = 10.0;
pub const DEFAULT_TILE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Laplace { bandwidth: f64 },
    NtkFc { depth: usize, bias: f64 },
}

impl KernelSpec {
    pub fn laplace(bandwidth: f64) -> Result<Self> {
        let s = KernelSpec::Laplace { bandwidth };
        s.validate()?;
        Ok(s)
    }

    pub fn ntk(depth: usize, bias: f64) -> Result<Self> {
        let s = KernelSpec::NtkFc { depth, bias };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Laplace { bandwidth } if bandwidth > 0.0 && bandwidth.is_finite() => Ok(()),
            KernelSpec::Laplace { bandwidth } => Err(Error::invalid(format!(
                "Laplace bandwidth must be positive, got {bandwidth}"
            ))),
            KernelSpec::NtkFc { depth: 0, .. } => {
                Err(Error::invalid("NTK needs at least one hidden layer"))
            }
            KernelSpec::NtkFc { bias, .. } if !(bias >= 0.0 && bias.is_finite()) => Err(
                Error::invalid(format!("NTK bias must be finite and >= 0, got {bias}")),
            ),
            KernelSpec::NtkFc { .. } => Ok(()),
        }
    }
}

fn clamp_cosine(u: f64) -> Result<f64> {
    if !(u.abs() <= 1.0 + COS_SLACK) {
        return Err(Error::invalid(format!("cosine {u} outside [-1, 1]")));
    }
    Ok(u.clamp(-1.0, 1.0))
}

/// Zeroth-order arc-cosine component, `(π − arccos u) / π`.
pub fn kappa0(u: f64) -> Result<f64> {
    let u = clamp_cosine(u)?;
    Ok((PI - u.acos()) / PI)
}

/// First-order arc-cosine component, `(u(π − arccos u) + √(1 − u²)) / π`.
pub fn kappa1(u: f64) -> Result<f64> {
    let u = clamp_cosine(u)?;
    Ok((u * (PI - u.acos()) + (1.0 - u * u).max(0.0).sqrt()) / PI)
}

fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

fn ntk(x: &[f64], z: &[f64], depth: usize, bias: f64) -> Result<f64> {
    let b2 = bias * bias;
    let mut sxx = dot(x, x) + b2;
    let mut szz = dot(z, z) + b2;
    let mut sxz = dot(x, z) + b2;
    if sxx == 0.0 && szz == 0.0 {
        return Err(Error::Degenerate(
            "NTK of two zero vectors with zero bias".into(),
        ));
    }
    let mut theta = sxz;
    for _ in 0..depth {
        let norm = (sxx * szz).sqrt();
        // One zero input with no bias: every Σ and Θ stays exactly zero.
        let cos = if norm > 0.0 { sxz / norm } else { 0.0 };
        let derivative = kappa0(cos)?;
        sxz = norm * kappa1(cos)? + b2;
        // κ1(1) = 1, so the diagonal only accumulates the bias.
        sxx += b2;
        szz += b2;
        theta = theta * derivative + sxz;
    }
    Ok(theta)
}

/// `K(x, z)` for a single pair of points.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::dims(format!(
            "kernel inputs of length {} and {}",
            x.len(),
            z.len()
        )));
    }
    match *spec {
        KernelSpec::Linear => Ok(dot(x, z)),
        KernelSpec::Laplace { bandwidth } => {
            let dist = x
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok((-dist / bandwidth).exp())
        }
        KernelSpec::NtkFc { depth, bias } => ntk(x, z, depth, bias),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GramOptions {
    /// Edge length, in samples, of the square tiles filled per task.
    pub tile: usize,
    pub exec: Execution,
}

impl Default for GramOptions {
    fn default() -> Self {
        GramOptions {
            tile: DEFAULT_TILE,
            exec: Execution::Parallel,
        }
    }
}

fn check_inputs(spec: &KernelSpec, x: &DataMatrix, z: &DataMatrix) -> Result<()> {
    spec.validate()?;
    if x.dim() != z.dim() {
        return Err(Error::dims(format!(
            "gram between {}-dim and {}-dim samples",
            x.dim(),
            z.dim()
        )));
    }
    Ok(())
}

fn first_error(results: Vec<Result<()>>) -> Result<()> {
    results.into_iter().collect()
}

fn finite_or_err(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(Error::Numeric("non-finite kernel value".into()))
    }
}

/// Cross-Gram matrix `K(X, Z)` of shape `|X| × |Z|`.
pub fn gram(spec: &KernelSpec, x: &DataMatrix, z: &DataMatrix) -> Result<DMatrix<f64>> {
    gram_with(spec, x, z, GramOptions::default())
}

pub fn gram_with(
    spec: &KernelSpec,
    x: &DataMatrix,
    z: &DataMatrix,
    opts: GramOptions,
) -> Result<DMatrix<f64>> {
    check_inputs(spec, x, z)?;
    let (n, m) = (x.samples(), z.samples());
    let mut out = DMatrix::zeros(n, m);
    if n == 0 || m == 0 {
        return Ok(out);
    }
    let tile = opts.tile.max(1);
    // Column-major output: a band of `tile` columns is one contiguous chunk.
    let errors = std::sync::Mutex::new(Vec::new());
    par::for_each_chunk_mut(opts.exec, out.as_mut_slice(), n * tile, |band, chunk| {
        let j0 = band * tile;
        let width = chunk.len() / n;
        let res = (|| -> Result<()> {
            for i0 in (0..n).step_by(tile) {
                let i1 = (i0 + tile).min(n);
                for jj in 0..width {
                    let zj = z.sample(j0 + jj);
                    for i in i0..i1 {
                        chunk[jj * n + i] = kernel_eval(spec, x.sample(i), zj)?;
                    }
                }
            }
            Ok(())
        })();
        if res.is_err() {
            errors.lock().unwrap().push(res);
        }
    });
    first_error(errors.into_inner().unwrap())?;
    finite_or_err(out)
}

/// Gram matrix `K(X, X)`. Only the upper triangle is evaluated and mirrored,
/// so the result is exactly symmetric.
pub fn gram_symmetric(spec: &KernelSpec, x: &DataMatrix) -> Result<DMatrix<f64>> {
    gram_symmetric_with(spec, x, GramOptions::default())
}

pub fn gram_symmetric_with(
    spec: &KernelSpec,
    x: &DataMatrix,
    opts: GramOptions,
) -> Result<DMatrix<f64>> {
    check_inputs(spec, x, x)?;
    let n = x.samples();
    let mut out = DMatrix::zeros(n, n);
    if n == 0 {
        return Ok(out);
    }
    let tile = opts.tile.max(1);
    let errors = std::sync::Mutex::new(Vec::new());
    par::for_each_chunk_mut(opts.exec, out.as_mut_slice(), n * tile, |band, chunk| {
        let j0 = band * tile;
        let width = chunk.len() / n;
        let res = (|| -> Result<()> {
            for i0 in (0..(j0 + width).min(n)).step_by(tile) {
                for jj in 0..width {
                    let j = j0 + jj;
                    let xj = x.sample(j);
                    for i in i0..(i0 + tile).min(j + 1) {
                        chunk[jj * n + i] = kernel_eval(spec, x.sample(i), xj)?;
                    }
                }
            }
            Ok(())
        })();
        if res.is_err() {
            errors.lock().unwrap().push(res);
        }
    });
    first_error(errors.into_inner().unwrap())?;
    out.fill_lower_triangle_with_upper_triangle();
    finite_or_err(out)
}
