use kt_core::rng::seeded_rng;
use kt_core::scaling::prediction_gap;
use kt_core::theory::{projected_risk_terms, random_unit_map, epsilon_mismatch};
use kt_core::{extrapolate, fit_log_law, CurvePoint};

#[test]
fn closed_form_risk_curve_fit() {
    let d = 512;
    let mut rng = seeded_rng(1);
    let ws = random_unit_map(32, d, &mut rng);
    let wt = random_unit_map(3, d, &mut rng);
    let eps = epsilon_mismatch(&ws, &wt);
    let norm = wt.norm_squared();
    let xs = [8usize, 16, 32, 64, 128, 256];
    let pts: Vec<CurvePoint> = xs
        .iter()
        .map(|&n_t| CurvePoint {
            x: n_t as f64,
            y: projected_risk_terms(d, 256, n_t, 32, norm, eps).unwrap().risk,
        })
        .collect();
    let fit = fit_log_law(&pts[..5]).unwrap();
    assert!(fit.r_squared > 0.0 && fit.r_squared <= 1.0, "{fit:?}");
    assert!(fit.a < 0.0);
    let gap = prediction_gap(extrapolate(&fit, 256.0).unwrap(), pts[5].y);
    assert!(gap.absolute.is_finite() && gap.relative.is_finite());
    eprintln!("held-out gap: {:.4} absolute, {:.4} relative, r² = {:.5}", gap.absolute, gap.relative, fit.r_squared);
}

#[test]
fn fit_equivariance() {
    let mut rng = seeded_rng(2);
    use rand::Rng;
    let pts: Vec<CurvePoint> = (0..8)
        .map(|i| CurvePoint { x: 3.0 * (i + 1) as f64, y: rng.random::<f64>() })
        .collect();
    let base = fit_log_law(&pts).unwrap();
    let scaled_y: Vec<CurvePoint> = pts.iter().map(|p| CurvePoint { x: p.x, y: 2.5 * p.y }).collect();
    let f = fit_log_law(&scaled_y).unwrap();
    assert!((f.a - 2.5 * base.a).abs() <= 1e-12 && (f.b - 2.5 * base.b).abs() <= 1e-12);
    assert!((f.r_squared - base.r_squared).abs() <= 1e-12);
    let scaled_x: Vec<CurvePoint> = pts.iter().map(|p| CurvePoint { x: 4.0 * p.x, y: p.y }).collect();
    let f = fit_log_law(&scaled_x).unwrap();
    assert!((f.a - base.a).abs() <= 1e-12);
    assert!((f.b - (base.b - 2.0 * base.a)).abs() <= 1e-12);
    assert!((f.r_squared - base.r_squared).abs() <= 1e-12);
}
