//! Simulation of the linear transfer risks.
//!
//! Each trial draws fresh `X_s` (`d × n_s`) and `X_t` (`d × n_t`) with
//! standard Gaussian entries, labels them noiselessly with `ω_s` and `ω_t`,
//! fits the predictor through [`min_norm_linear`], and records
//! `‖ŵ − ω_t‖_F²`. Under identity input covariance that is exactly the
//! expected test error over a fresh `x`, so no inner test-set average is
//! needed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::regression::min_norm_linear;
use crate::rng::substream;

use super::{
    baseline_risk, gaussian_matrix, projected_risk_closed_form, translated_risk_closed_form,
    LinearTaskParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// `ω̂_b = y_t X_t†`.
    Baseline,
    /// `ω̂_p ω̂_s` with `ω̂_s = y_s X_s†`, `ω̂_p = y_t (ω̂_s X_t)†`.
    Projected,
    /// `ω̂_s + (y_t − ω̂_s X_t) X_t†`.
    Translated,
}

impl Predictor {
    pub fn name(self) -> &'static str {
        match self {
            Predictor::Baseline => "baseline",
            Predictor::Projected => "projected",
            Predictor::Translated => "translated",
        }
    }

    pub fn closed_form(self, p: &LinearTaskParams) -> Result<f64> {
        match self {
            Predictor::Baseline => Ok(baseline_risk(p)),
            Predictor::Projected => Ok(projected_risk_closed_form(p)?.risk),
            Predictor::Translated => translated_risk_closed_form(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub closed_form: f64,
    pub mc_mean: f64,
    /// Sample standard deviation over `√trials`.
    pub mc_stderr: f64,
    pub trials: usize,
}

impl RiskReport {
    /// `|closed_form − mc_mean|` in standard errors.
    pub fn z_score(&self) -> f64 {
        let diff = (self.closed_form - self.mc_mean).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.mc_stderr
        }
    }

    /// Closed form within `k` standard errors of the estimate, plus an
    /// absolute roundoff floor for cells whose exact risk is zero.
    pub fn agrees(&self, k: f64, floor: f64) -> bool {
        (self.closed_form - self.mc_mean).abs() <= k * self.mc_stderr + floor
    }
}

/// One simulated `‖ŵ − ω_t‖_F²`.
pub fn trial_loss(
    p: &LinearTaskParams,
    predictor: Predictor,
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
) -> Result<f64> {
    let wt = p.omega_t();
    let yt = wt * xt;
    let estimate = match predictor {
        Predictor::Baseline => min_norm_linear(xt, &yt)?.0,
        Predictor::Projected => {
            let ws_hat = min_norm_linear(xs, &(p.omega_s() * xs))?.0;
            let features = &ws_hat * xt;
            let head = min_norm_linear(&features, &yt)?.0;
            head * ws_hat
        }
        Predictor::Translated => {
            let ws_hat = min_norm_linear(xs, &(p.omega_s() * xs))?.0;
            let residual = &yt - &ws_hat * xt;
            ws_hat + min_norm_linear(xt, &residual)?.0
        }
    };
    Ok((estimate - wt).norm_squared())
}

pub fn monte_carlo_risk(
    p: &LinearTaskParams,
    predictor: Predictor,
    trials: usize,
    seed: u64,
) -> Result<RiskReport> {
    monte_carlo_risk_with(p, predictor, trials, seed, Execution::Parallel)
}

/// Trial `i` draws from substream `(seed, i)`; losses are summed in trial
/// order, so the report is bit-identical for a given seed.
pub fn monte_carlo_risk_with(
    p: &LinearTaskParams,
    predictor: Predictor,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<RiskReport> {
    if trials < 2 {
        return Err(Error::invalid("Monte Carlo risk needs at least two trials"));
    }
    let closed_form = predictor.closed_form(p)?;
    let losses = par::map_range(exec, trials, |i| {
        let mut rng = substream(seed, &[i as u64]);
        let xs = gaussian_matrix(p.d(), p.n_s(), &mut rng);
        let xt = gaussian_matrix(p.d(), p.n_t(), &mut rng);
        trial_loss(p, predictor, &xs, &xt)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let n = trials as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0);
    Ok(RiskReport {
        closed_form,
        mc_mean: mean,
        mc_stderr: (var / n).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::theory::random_unit_map;

    fn task(d: usize, n_s: usize, n_t: usize, c_s: usize, c_t: usize, seed: u64) -> LinearTaskParams {
        let mut rng = seeded_rng(seed);
        let ws = random_unit_map(c_s, d, &mut rng);
        let wt = random_unit_map(c_t, d, &mut rng);
        LinearTaskParams::new(n_s, n_t, ws, wt).unwrap()
    }

    #[test]
    fn baseline_with_full_target_is_exact() {
        let p = task(12, 0, 12, 2, 3, 1);
        let r = monte_carlo_risk(&p, Predictor::Baseline, 50, 7).unwrap();
        assert!(r.mc_mean <= 1e-12, "{}", r.mc_mean);
        assert_eq!(r.closed_form, 0.0);
        assert!(r.agrees(4.0, 1e-12));
    }

    #[test]
    fn baseline_matches_closed_form() {
        let p = task(16, 0, 6, 2, 3, 2);
        let r = monte_carlo_risk(&p, Predictor::Baseline, 2000, 8).unwrap();
        assert!(r.agrees(4.0, 0.0), "{r:?}");
    }

    #[test]
    fn translated_matches_closed_form() {
        let p = task(16, 10, 6, 3, 3, 3);
        let r = monte_carlo_risk(&p, Predictor::Translated, 2000, 9).unwrap();
        assert!(r.agrees(4.0, 0.0), "{r:?}");
    }

    #[test]
    fn no_source_samples_projected_is_zero_map() {
        let p = task(8, 0, 5, 2, 2, 4);
        let xs = DMatrix::zeros(8, 0);
        let xt = gaussian_matrix(8, 5, &mut seeded_rng(1));
        let loss = trial_loss(&p, Predictor::Projected, &xs, &xt).unwrap();
        assert!((loss - p.omega_t_norm_sq()).abs() < 1e-14);
    }

    #[test]
    fn seeded_reports_are_identical() {
        let p = task(10, 5, 4, 2, 2, 5);
        let a = monte_carlo_risk_with(&p, Predictor::Projected, 64, 3, Execution::Sequential).unwrap();
        let b = monte_carlo_risk_with(&p, Predictor::Projected, 64, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_risk_with(&p, Predictor::Projected, 64, 4, Execution::Parallel).unwrap();
        assert_ne!(a.mc_mean, c.mc_mean);
    }

    #[test]
    fn needs_two_trials() {
        let p = task(4, 1, 1, 1, 1, 6);
        assert!(monte_carlo_risk(&p, Predictor::Baseline, 1, 0).is_err());
    }
}
