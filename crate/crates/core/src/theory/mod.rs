//! Risk of transferred linear predictors.
//!
//! Source and target tasks are linear maps `ω_s` (`c_s × d`) and `ω_t`
//! (`c_t × d`), inputs are isotropic standard Gaussian, and every fitted map
//! is the minimum-norm least-squares solution. The functions here evaluate
//! the closed-form risks of the baseline, projected, and translated
//! predictors together with their large-`d` limit; [`monte_carlo`] estimates
//! the same risks by simulation so the two can be compared.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pinv;

pub mod haar;
pub mod moment;
pub mod monte_carlo;
pub mod regimes;

pub use haar::{haar_orthogonal, random_projection};
pub use moment::{projection_moment_closed_form, projection_moment_monte_carlo, MomentEstimate, MomentParams};
pub use monte_carlo::{monte_carlo_risk, monte_carlo_risk_with, Predictor, RiskReport};
pub use regimes::{regime_check, RegimeOutcome, RegimeReport};

/// A linear transfer problem: dimension, sample counts, and the two maps.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTaskParams {
    d: usize,
    n_s: usize,
    n_t: usize,
    omega_s: DMatrix<f64>,
    omega_t: DMatrix<f64>,
}

impl LinearTaskParams {
    pub fn new(
        n_s: usize,
        n_t: usize,
        omega_s: DMatrix<f64>,
        omega_t: DMatrix<f64>,
    ) -> Result<Self> {
        let d = omega_t.ncols();
        if omega_s.ncols() != d {
            return Err(Error::dims(format!(
                "ω_s has {} columns, ω_t has {d}",
                omega_s.ncols()
            )));
        }
        if d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
        }
        if n_s > d || n_t > d {
            return Err(Error::invalid(format!(
                "sample counts n_s = {n_s}, n_t = {n_t} must not exceed d = {d}"
            )));
        }
        if omega_s.nrows() == 0 || omega_t.nrows() == 0 {
            return Err(Error::invalid("ω_s and ω_t need at least one row"));
        }
        if omega_s.iter().chain(omega_t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite entry in ω_s or ω_t".into()));
        }
        Ok(LinearTaskParams {
            d,
            n_s,
            n_t,
            omega_s,
            omega_t,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n_s(&self) -> usize {
        self.n_s
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn c_s(&self) -> usize {
        self.omega_s.nrows()
    }
    pub fn c_t(&self) -> usize {
        self.omega_t.nrows()
    }
    pub fn omega_s(&self) -> &DMatrix<f64> {
        &self.omega_s
    }
    pub fn omega_t(&self) -> &DMatrix<f64> {
        &self.omega_t
    }

    pub fn omega_t_norm_sq(&self) -> f64 {
        self.omega_t.norm_squared()
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_mismatch(&self.omega_s, &self.omega_t)
    }

    pub fn with_samples(&self, n_s: usize, n_t: usize) -> Result<Self> {
        Self::new(n_s, n_t, self.omega_s.clone(), self.omega_t.clone())
    }
}

/// Closed-form projected risk and its constituent coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    pub risk: f64,
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
    pub epsilon: f64,
}

/// Proportional-limit parameters `S = n_s/d`, `T = n_t/d`, `C = c_s/d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub s: f64,
    pub t: f64,
    pub c: f64,
    pub omega_t_norm_sq: f64,
    pub epsilon: f64,
}

impl AsymptoticParams {
    pub fn from_task(p: &LinearTaskParams) -> Self {
        let d = p.d() as f64;
        AsymptoticParams {
            s: p.n_s() as f64 / d,
            t: p.n_t() as f64 / d,
            c: p.c_s() as f64 / d,
            omega_t_norm_sq: p.omega_t_norm_sq(),
            epsilon: p.epsilon(),
        }
    }
}

/// `‖ω_t (I − ω_s† ω_s)‖_F²`: the energy of `ω_t` outside the row space of
/// `ω_s`.
pub fn epsilon_mismatch(omega_s: &DMatrix<f64>, omega_t: &DMatrix<f64>) -> f64 {
    assert_eq!(omega_s.ncols(), omega_t.ncols(), "ω_s and ω_t must share d");
    let row_space = pinv(omega_s) * omega_s;
    let inside = omega_t * row_space;
    (omega_t - inside).norm_squared()
}

/// `(1 − n_t/d) ‖ω_t‖_F²`.
pub fn baseline_risk(p: &LinearTaskParams) -> f64 {
    baseline_risk_terms(p.d(), p.n_t(), p.omega_t_norm_sq())
}

pub fn baseline_risk_terms(d: usize, n_t: usize, omega_t_norm_sq: f64) -> f64 {
    (1.0 - n_t as f64 / d as f64) * omega_t_norm_sq
}

/// Projected-predictor risk from scalar inputs; `omega_t_norm_sq` and
/// `epsilon` are taken as given rather than computed from matrices.
pub fn projected_risk_terms(
    d: usize,
    n_s: usize,
    n_t: usize,
    c_s: usize,
    omega_t_norm_sq: f64,
    epsilon: f64,
) -> Result<RiskDecomposition> {
    if d < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
    }
    let (df, ns, nt, cs) = (d as f64, n_s as f64, n_t as f64, c_s as f64);
    let denom = df * (df - 1.0) * (df + 2.0);
    let c1 = ns * cs * (df - ns) / denom;
    let c2 = ns * (df * (ns + 1.0) - 2.0) / denom;
    let k1 = 1.0 - nt * (df - cs) / ((df - 1.0) * (df + 2.0));
    let k2 = nt / df + nt * (df - nt) / ((df - 1.0) * (df + 2.0));
    let risk = ((c1 + c2 * k1) * (1.0 - nt / df) + (1.0 - c1 - c2)) * omega_t_norm_sq
        + c2 * k2 * epsilon;
    Ok(RiskDecomposition {
        risk,
        c1,
        c2,
        k1,
        k2,
        epsilon,
    })
}

/// Closed-form risk of `ω̂_p ω̂_s` with `ω̂_s = y_s X_s†` and
/// `ω̂_p = y_t (ω̂_s X_t)†`.
pub fn projected_risk_closed_form(p: &LinearTaskParams) -> Result<RiskDecomposition> {
    projected_risk_terms(
        p.d(),
        p.n_s(),
        p.n_t(),
        p.c_s(),
        p.omega_t_norm_sq(),
        p.epsilon(),
    )
}

/// Projected risk when the source map is known exactly (`n_s = d`):
/// `K1 (1 − n_t/d) ‖ω_t‖² + K2 ε`.
pub fn exact_source_projected_risk(
    d: usize,
    n_t: usize,
    c_s: usize,
    omega_t_norm_sq: f64,
    epsilon: f64,
) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
    }
    let (df, nt, cs) = (d as f64, n_t as f64, c_s as f64);
    let k1 = 1.0 - nt * (df - cs) / ((df + 2.0) * (df - 1.0));
    let k2 = nt * (1.0 / df + (df - nt) / ((df + 2.0) * (df - 1.0)));
    Ok(k1 * baseline_risk_terms(d, n_t, omega_t_norm_sq) + k2 * epsilon)
}

/// Closed-form risk of the translated predictor `ω̂_s + (y_t − ω̂_s X_t) X_t†`:
/// `[δ + (1 − n_s/d)(1 − δ)] · (1 − n_t/d)‖ω_t‖²` with
/// `δ = ‖ω_s − ω_t‖² / ‖ω_t‖²`.
pub fn translated_risk_closed_form(p: &LinearTaskParams) -> Result<f64> {
    if p.c_s() != p.c_t() {
        return Err(Error::dims(format!(
            "translation needs c_s = c_t, got {} and {}",
            p.c_s(),
            p.c_t()
        )));
    }
    let norm_sq = p.omega_t_norm_sq();
    if norm_sq <= 0.0 {
        return Err(Error::Degenerate("‖ω_t‖_F = 0".into()));
    }
    let delta = (p.omega_s() - p.omega_t()).norm_squared() / norm_sq;
    let keep = 1.0 - p.n_s() as f64 / p.d() as f64;
    Ok((delta + keep * (1.0 - delta)) * baseline_risk(p))
}

/// Large-`d` limit of the projected risk:
/// `[1 − 2S²T + S²T² + (2S − 1 − ST)STC]‖ω_t‖² + S²T(2 − T)ε`.
pub fn asymptotic_projected_risk(ap: &AsymptoticParams) -> f64 {
    let AsymptoticParams {
        s,
        t,
        c,
        omega_t_norm_sq,
        epsilon,
    } = *ap;
    (1.0 - 2.0 * s * s * t + s * s * t * t + (2.0 * s - 1.0 - s * t) * s * t * c) * omega_t_norm_sq
        + s * s * t * (2.0 - t) * epsilon
}

/// The `S = 1` form `(1 − T + TC)(1 − T)‖ω_t‖² + εT(2 − T)`.
pub fn full_source_asymptotic_risk(t: f64, c: f64, omega_t_norm_sq: f64, epsilon: f64) -> f64 {
    (1.0 - t + t * c) * (1.0 - t) * omega_t_norm_sq + epsilon * t * (2.0 - t)
}

/// I.i.d. Gaussian `rows × cols` matrix rescaled to unit Frobenius norm.
pub fn random_unit_map<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let m = gaussian_matrix(rows, cols, rng);
    let n = m.norm();
    m / n
}

/// Standard Gaussian entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}
