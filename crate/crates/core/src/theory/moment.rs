//! Expectation of `P Q P` for a uniformly rotated rank-`p` projection `P`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::substream;

use super::haar_orthogonal;

/// Draws are accumulated in fixed blocks so the reduction order, and so the
/// result, does not depend on the number of threads.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentParams {
    pub d: usize,
    /// Rank of the random projection `P = W D Wᵀ`.
    pub p: usize,
    /// Rank of the fixed projection `Q`.
    pub q: usize,
}

impl MomentParams {
    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {}", self.d)));
        }
        if self.p > self.d || self.q > self.d {
            return Err(Error::invalid(format!(
                "ranks p = {}, q = {} exceed d = {}",
                self.p, self.q, self.d
            )));
        }
        Ok(())
    }
}

fn check_projection(lp: &MomentParams, q: &DMatrix<f64>) -> Result<()> {
    if q.shape() != (lp.d, lp.d) {
        return Err(Error::dims(format!(
            "Q is {}x{}, expected {}x{}",
            q.nrows(),
            q.ncols(),
            lp.d,
            lp.d
        )));
    }
    let tol = 1e-8 * (lp.d as f64);
    if (q - q.transpose()).amax() > tol || (q * q - q).amax() > tol {
        return Err(Error::invalid("Q is not a symmetric projection"));
    }
    // A projection's rank is its trace.
    let rank = q.trace();
    if (rank - lp.q as f64).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "Q has rank {rank:.6}, expected {}",
            lp.q
        )));
    }
    Ok(())
}

/// `E_W[P Q P] = p / (d(d−1)(d+2)) · [q(d − p) I + (d(p + 1) − 2) Q]`.
///
/// The two coefficients are formed from exact integer ratios, so `p = d`
/// returns `Q` bit for bit.
pub fn projection_moment_closed_form(lp: &MomentParams, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    lp.validate()?;
    check_projection(lp, q)?;
    let (d, p, r) = (lp.d as i128, lp.p as i128, lp.q as i128);
    let denom = d * (d - 1) * (d + 2);
    let ratio = |num: i128| -> f64 {
        if num % denom == 0 {
            (num / denom) as f64
        } else {
            num as f64 / denom as f64
        }
    };
    let identity_coeff = ratio(p * r * (d - p));
    let q_coeff = ratio(p * (d * (p + 1) - 2));
    let mut out = q * q_coeff;
    for i in 0..lp.d {
        out[(i, i)] += identity_coeff;
    }
    Ok(out)
}

/// Entrywise Monte Carlo mean of `P Q P` and its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    pub draws: usize,
}

/// Averages `W D Wᵀ Q W D Wᵀ` over `draws` Haar matrices `W`, with `D` the
/// diagonal 0/1 matrix of rank `p`.
pub fn projection_moment_monte_carlo(
    lp: &MomentParams,
    q: &DMatrix<f64>,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<MomentEstimate> {
    lp.validate()?;
    check_projection(lp, q)?;
    if draws < 2 {
        return Err(Error::invalid("need at least two draws for a standard error"));
    }
    let d = lp.d;
    let blocks = draws.div_ceil(BLOCK);
    let partial = par::map_range(exec, blocks, |b| {
        let mut sum = DMatrix::zeros(d, d);
        let mut sum_sq = DMatrix::zeros(d, d);
        for i in b * BLOCK..((b + 1) * BLOCK).min(draws) {
            let mut rng = substream(seed, &[i as u64]);
            let w = haar_orthogonal(d, &mut rng);
            let basis = w.columns(0, lp.p);
            let proj = basis * basis.transpose();
            let sample = &proj * q * &proj;
            sum_sq += sample.component_mul(&sample);
            sum += sample;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial.into_iter().fold(
        (DMatrix::zeros(d, d), DMatrix::zeros(d, d)),
        |(s, s2), (b, b2)| (s + b, s2 + b2),
    );
    let n = draws as f64;
    let mean = sum / n;
    let stderr = DMatrix::from_fn(d, d, |i, j| {
        let var = ((sum_sq[(i, j)] - n * mean[(i, j)] * mean[(i, j)]) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    });
    Ok(MomentEstimate {
        mean,
        stderr,
        draws,
    })
}
