//! Dense solvers: SVD pseudo-inverse, Cholesky, and conjugate gradient.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Truncation threshold factor for singular values: `ε_mach · max(m, n)`.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

/// Moore–Penrose pseudo-inverse. Singular values at or below
/// `default_rcond · σ_max` are treated as zero.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let s = &svd.singular_values;
    let smax = s.max();
    let cutoff = default_rcond(m, n) * smax;
    // V Σ⁺ Uᵀ with truncated singular values dropped.
    let mut v = v_t.transpose();
    for (k, mut col) in v.column_iter_mut().enumerate() {
        if s[k] > cutoff && s[k] > 0.0 {
            col /= s[k];
        } else {
            col.fill(0.0);
        }
    }
    v * u.transpose()
}

/// Numerical rank under the same truncation rule as [`pinv`].
pub fn rank(a: &DMatrix<f64>) -> usize {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0;
    }
    let s = a.clone().singular_values();
    let cutoff = default_rcond(m, n) * s.max();
    s.iter().filter(|&&v| v > cutoff && v > 0.0).count()
}

/// Solves `A X = B` for symmetric positive-definite `A`; `None` when the
/// Cholesky factorization fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(a.clone()).map(|c| c.solve(b))
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub fn symmetric_condition(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let ev = a.clone().symmetric_eigenvalues();
    let hi = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lo = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `‖b − (A + shift·I)x‖ / ‖b‖`, recomputed from scratch at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient for `(A + shift·I) x = b` with symmetric
/// positive-definite `A + shift·I`, starting from `x = 0`.
pub fn conjugate_gradient(
    a: &DMatrix<f64>,
    shift: f64,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::dims(format!(
            "CG system {}x{} with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let apply = |v: &DVector<f64>| -> DVector<f64> { a * v + v * shift };
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut iterations = 0;
    while iterations < max_iter && rr.sqrt() > tol * b_norm {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::Numeric(format!(
                "CG curvature pᵀAp = {pap} at iteration {iterations}; system is not positive definite"
            )));
        }
        let step = rr / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rr_next = r.dot(&r);
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
        iterations += 1;
    }
    let relative_residual = (b - apply(&x)).norm() / b_norm;
    // The recurrence can drift from the true residual; judge on the latter
    // but allow for the roundoff floor of forming it.
    let converged = relative_residual <= tol.max(f64::EPSILON * n as f64);
    Ok(CgOutcome {
        x,
        iterations,
        relative_residual,
        converged,
    })
}
