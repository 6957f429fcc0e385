//! Logarithmic scaling law `y = a·log₂x + b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Sample count; must be positive.
    pub x: f64,
    pub y: f64,
}

impl CurvePoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x > 0.0 && x.is_finite()) || !y.is_finite() {
            return Err(Error::invalid(format!(
                "curve point needs finite x > 0 and finite y, got ({x}, {y})"
            )));
        }
        Ok(CurvePoint { x, y })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    /// Coefficient of determination on the fitted points. Constant targets
    /// give 1 when the residual is zero and `-inf` otherwise.
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn r_squared_defined(&self) -> bool {
        self.r_squared.is_finite()
    }

    /// `r²` as text, with `"undefined"` for the sentinel.
    pub fn r_squared_label(&self) -> String {
        if self.r_squared_defined() {
            format!("{}", self.r_squared)
        } else {
            "undefined".to_string()
        }
    }
}

/// Least squares in `u = log₂x`.
pub fn fit_log_law(points: &[CurvePoint]) -> Result<ScalingFit> {
    for p in points {
        CurvePoint::new(p.x, p.y)?;
    }
    let first = points
        .first()
        .ok_or_else(|| Error::Degenerate("scaling fit needs at least two points".into()))?;
    if points.iter().all(|p| p.x == first.x) {
        return Err(Error::Degenerate(
            "scaling fit needs at least two distinct x values".into(),
        ));
    }
    if points.iter().all(|p| p.y == first.y) {
        return Ok(ScalingFit {
            a: 0.0,
            b: first.y,
            r_squared: 1.0,
        });
    }
    let n = points.len() as f64;
    let us: Vec<f64> = points.iter().map(|p| p.x.log2()).collect();
    let u_mean = us.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mut suu = 0.0;
    let mut suy = 0.0;
    for (u, p) in us.iter().zip(points) {
        suu += (u - u_mean) * (u - u_mean);
        suy += (u - u_mean) * (p.y - y_mean);
    }
    let a = suy / suu;
    let b = y_mean - a * u_mean;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (u, p) in us.iter().zip(points) {
        let r = p.y - (a * u + b);
        ss_res += r * r;
        ss_tot += (p.y - y_mean) * (p.y - y_mean);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(ScalingFit { a, b, r_squared })
}

pub fn extrapolate(fit: &ScalingFit, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("extrapolation needs x > 0, got {x}")));
    }
    Ok(fit.a * x.log2() + fit.b)
}

/// Gap between a prediction and an observed value, both absolute and
/// relative to the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionGap {
    pub absolute: f64,
    /// `NaN` when the observation is zero.
    pub relative: f64,
}

pub fn prediction_gap(predicted: f64, observed: f64) -> PredictionGap {
    let absolute = (predicted - observed).abs();
    let relative = if observed == 0.0 {
        f64::NAN
    } else {
        absolute / observed.abs()
    };
    PredictionGap { absolute, relative }
}
