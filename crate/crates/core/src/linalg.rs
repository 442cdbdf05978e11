//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is not positive definite even with jitter {max_jitter:e}")]
pub struct NotPositiveDefinite {
    pub max_jitter: f64,
}

/// Lower Cholesky factor with a jitter ladder: on failure, add
/// `1e-9 * mean(diag)` to the diagonal and retry, multiplying the jitter by
/// ten each attempt until it exceeds `1e-3 * mean(diag)`.
///
/// Returns the factor and the jitter that was finally added (0 if none).
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), NotPositiveDefinite> {
    if let Some(c) = a.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let n = a.nrows();
    let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64;
    let max_jitter = 1e-3 * mean_diag;
    if !(mean_diag > 0.0) || !mean_diag.is_finite() {
        return Err(NotPositiveDefinite { max_jitter });
    }
    let mut jitter = 1e-9 * mean_diag;
    while jitter <= max_jitter * (1.0 + 1e-12) {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(c) = b.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(NotPositiveDefinite { max_jitter })
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_solve(l: &DMatrix<f64>, b: &[f64]) -> DVector<f64> {
    let n = b.len();
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn backward_solve_transpose(l: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = y.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in (i + 1)..n {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// `sum(log(diag(L)))`, half the log-determinant of `L L^T`.
pub fn half_log_det(l: &DMatrix<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum()
}

/// Numerically stable `log(sum(exp(v)))`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
