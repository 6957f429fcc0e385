//! Numerical checks of the qualitative regimes of the asymptotic projected
//! risk.

use serde::{Deserialize, Serialize};

use super::{asymptotic_projected_risk, full_source_asymptotic_risk, AsymptoticParams};

/// Step of the dense `S` grid on `[0, 1]`.
pub const S_GRID_STEP: f64 = 0.01;
const S_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeOutcome {
    /// Whether the regime's hypothesis holds at the given parameters.
    pub applicable: bool,
    /// Vacuously true when not applicable.
    pub passed: bool,
    /// First violating point, as `(S, value)`.
    pub witness: Option<(f64, f64)>,
}

impl RegimeOutcome {
    fn vacuous() -> Self {
        RegimeOutcome {
            applicable: false,
            passed: true,
            witness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub params: AsymptoticParams,
    /// `ε < (1 − C)‖ω_t‖²`, the reading used to gate the monotonicity check.
    pub condition_squared_norm: bool,
    /// `ε < (1 − C)‖ω_t‖`, recorded alongside.
    pub condition_norm: bool,
    /// Risk nonincreasing in `S` over the grid.
    pub monotone_in_s: RegimeOutcome,
    /// Sign of `∂R/∂C` agrees with `sign(2S − 1 − ST)` over the grid.
    pub c_sensitivity_sign: RegimeOutcome,
    /// `2S − 1 − ST > 0` at the given `S`, `T`.
    pub increasing_in_c: bool,
    /// Second-order accuracy of `(1 − 2T)‖ω_t‖² + 2Tε` at `S = 1`.
    pub small_target_expansion: RegimeOutcome,
    /// Last error ratio of the halving sequence.
    pub halving_ratio: Option<f64>,
}

impl RegimeReport {
    pub fn all_passed(&self) -> bool {
        self.monotone_in_s.passed && self.c_sensitivity_sign.passed && self.small_target_expansion.passed
    }
}

fn s_grid() -> impl Iterator<Item = f64> {
    (0..S_GRID_POINTS).map(|k| k as f64 * S_GRID_STEP)
}

fn with_s(ap: &AsymptoticParams, s: f64) -> AsymptoticParams {
    AsymptoticParams { s, ..*ap }
}

fn tolerance(ap: &AsymptoticParams) -> f64 {
    1e-12 * (ap.omega_t_norm_sq + ap.epsilon).max(1.0)
}

fn check_monotone(ap: &AsymptoticParams, applicable: bool) -> RegimeOutcome {
    if !applicable {
        return RegimeOutcome::vacuous();
    }
    let tol = tolerance(ap);
    let mut prev = asymptotic_projected_risk(&with_s(ap, 0.0));
    for s in s_grid().skip(1) {
        let r = asymptotic_projected_risk(&with_s(ap, s));
        if r > prev + tol {
            return RegimeOutcome {
                applicable,
                passed: false,
                witness: Some((s, r - prev)),
            };
        }
        prev = r;
    }
    RegimeOutcome {
        applicable,
        passed: true,
        witness: None,
    }
}

fn sign(x: f64, tol: f64) -> i8 {
    if x > tol {
        1
    } else if x < -tol {
        -1
    } else {
        0
    }
}

fn check_c_sensitivity(ap: &AsymptoticParams) -> RegimeOutcome {
    // The risk is affine in C, so a unit difference is the exact derivative.
    let tol = tolerance(ap);
    let applicable = ap.t > 0.0 && ap.omega_t_norm_sq > 0.0;
    if !applicable {
        return RegimeOutcome::vacuous();
    }
    for s in s_grid().skip(1) {
        let lo = asymptotic_projected_risk(&AsymptoticParams { s, ..*ap });
        let hi = asymptotic_projected_risk(&AsymptoticParams { s, c: ap.c + 1.0, ..*ap });
        let slope = hi - lo;
        let predicted = 2.0 * s - 1.0 - s * ap.t;
        if sign(slope, tol) != sign(predicted, 1e-12) {
            return RegimeOutcome {
                applicable,
                passed: false,
                witness: Some((s, slope)),
            };
        }
    }
    RegimeOutcome {
        applicable,
        passed: true,
        witness: None,
    }
}

/// Halving steps for the `S = 1` expansion test.
pub const HALVING_STEPS: usize = 8;
const HALVING_START: f64 = 0.1;

fn check_expansion(ap: &AsymptoticParams) -> (RegimeOutcome, Option<f64>) {
    // T = τδ, C = γδ with (τ, γ) taken from the given point; zeros fall back to 1.
    let tau = if ap.t > 0.0 { ap.t } else { 1.0 };
    let gamma = if ap.c > 0.0 { ap.c } else { 1.0 };
    let norm = ap.omega_t_norm_sq;
    let eps = ap.epsilon;
    let leading = tau * tau * (norm - eps) + tau * gamma * norm;
    if leading.abs() <= 1e-12 * norm.max(1.0) {
        return (RegimeOutcome::vacuous(), None);
    }
    let error = |delta: f64| {
        let t = tau * delta;
        let c = gamma * delta;
        full_source_asymptotic_risk(t, c, norm, eps) - ((1.0 - 2.0 * t) * norm + 2.0 * t * eps)
    };
    let mut delta = HALVING_START;
    let mut prev = error(delta);
    let mut ratio = f64::NAN;
    for _ in 0..HALVING_STEPS {
        delta /= 2.0;
        let e = error(delta);
        ratio = prev / e;
        prev = e;
    }
    let passed = (ratio - 4.0).abs() <= 0.5;
    let outcome = RegimeOutcome {
        applicable: true,
        passed,
        witness: if passed { None } else { Some((delta, ratio)) },
    };
    (outcome, Some(ratio))
}

pub fn regime_check(ap: &AsymptoticParams) -> RegimeReport {
    let norm_sq = ap.omega_t_norm_sq;
    let condition_squared_norm = ap.epsilon < (1.0 - ap.c) * norm_sq;
    let condition_norm = ap.epsilon < (1.0 - ap.c) * norm_sq.sqrt();
    let monotone_in_s = check_monotone(ap, condition_squared_norm);
    let c_sensitivity_sign = check_c_sensitivity(ap);
    let (small_target_expansion, halving_ratio) = check_expansion(ap);
    RegimeReport {
        params: *ap,
        condition_squared_norm,
        condition_norm,
        monotone_in_s,
        c_sensitivity_sign,
        increasing_in_c: 2.0 * ap.s - 1.0 - ap.s * ap.t > 0.0,
        small_target_expansion,
        halving_ratio,
    }
}
