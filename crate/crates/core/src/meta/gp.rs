//! Exact Gaussian process regression with a squared-exponential ARD kernel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::MetaError;
use crate::linalg::{backward_solve_transpose, cholesky_with_jitter, forward_solve, half_log_det};
use crate::rng;

/// Standardized features are clipped to `±FEATURE_CLIP`.
pub const FEATURE_CLIP: f64 = 10.0;

/// Minimum training rows for a fit.
pub const MIN_TRAIN_ROWS: usize = 10;

/// Box constraints on the log hyperparameters.
const LOG_LENGTHSCALE: (f64, f64) = (-4.6, 6.9);
const LOG_SIGNAL: (f64, f64) = (-9.2, 9.2);
const LOG_NOISE: (f64, f64) = (-18.4, 4.6);

/// Kernel hyperparameters in log space: per-feature length-scales, signal
/// variance and noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub log_lengthscales: Vec<f64>,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
}

impl GpHyper {
    fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_lengthscales.clone();
        v.push(self.log_signal_var);
        v.push(self.log_noise_var);
        v
    }

    fn from_vec(v: &[f64]) -> Self {
        let p = v.len() - 2;
        Self {
            log_lengthscales: v[..p].to_vec(),
            log_signal_var: v[p],
            log_noise_var: v[p + 1],
        }
    }

    fn clamp(v: &mut [f64]) {
        let p = v.len() - 2;
        for x in &mut v[..p] {
            *x = x.clamp(LOG_LENGTHSCALE.0, LOG_LENGTHSCALE.1);
        }
        v[p] = v[p].clamp(LOG_SIGNAL.0, LOG_SIGNAL.1);
        v[p + 1] = v[p + 1].clamp(LOG_NOISE.0, LOG_NOISE.1);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Optimizer starts; the first is a fixed default, the rest random.
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop when an accepted step improves the objective by less than this
    /// (relative).
    pub tol: f64,
    pub seed: u64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iters: 150,
            tol: 1e-8,
            seed: 0,
        }
    }
}

/// Squared-exponential kernel without noise.
fn se_kernel(a: &[f64], b: &[f64], inv_ls2: &[f64], signal: f64) -> f64 {
    let s: f64 = a.iter().zip(b).zip(inv_ls2).map(|((x, y), w)| (x - y) * (x - y) * w).sum();
    signal * (-0.5 * s).exp()
}

fn inv_ls2(h: &GpHyper) -> Vec<f64> {
    h.log_lengthscales.iter().map(|l| (-2.0 * l).exp()).collect()
}

fn gram(x: &[Vec<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = x.len();
    let w = inv_ls2(h);
    let signal = h.log_signal_var.exp();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = se_kernel(&x[i], &x[j], &w, signal);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Noisy Gram matrix factorized with the jitter ladder.
fn factorize(x: &[Vec<f64>], h: &GpHyper) -> Result<(DMatrix<f64>, DMatrix<f64>), MetaError> {
    let k = gram(x, h);
    let mut ky = k.clone();
    let noise = h.log_noise_var.exp();
    for i in 0..x.len() {
        ky[(i, i)] += noise;
    }
    let (l, _) = cholesky_with_jitter(&ky).map_err(|e| MetaError::Factorization(e.to_string()))?;
    Ok((k, l))
}

fn solve(l: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    backward_solve_transpose(l, &forward_solve(l, y))
}

/// Log marginal likelihood of `y` under the GP prior.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], h: &GpHyper) -> Result<f64, MetaError> {
    let (_, l) = factorize(x, h)?;
    let alpha = solve(&l, y);
    let n = y.len() as f64;
    Ok(-0.5 * DVector::from_column_slice(y).dot(&alpha) - half_log_det(&l) - 0.5 * n * (2.0 * PI).ln())
}

/// Log marginal likelihood and its gradient with respect to the log
/// hyperparameters, ordered as length-scales, signal, noise.
///
/// `d/dθ = tr((α αᵀ - K⁻¹) dK/dθ) / 2`.
pub fn log_marginal_likelihood_grad(x: &[Vec<f64>], y: &[f64], h: &GpHyper) -> Result<(f64, Vec<f64>), MetaError> {
    let n = y.len();
    let p = h.log_lengthscales.len();
    let (k, l) = factorize(x, h)?;
    let alpha = solve(&l, y);
    let lml = -0.5 * DVector::from_column_slice(y).dot(&alpha) - half_log_det(&l) - 0.5 * n as f64 * (2.0 * PI).ln();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| MetaError::Factorization("singular Cholesky factor".into()))?;
    let k_inv = l_inv.transpose() * &l_inv;
    let w_ls = inv_ls2(h);
    let mut grad = vec![0.0; p + 2];
    for i in 0..n {
        for j in 0..n {
            let wij = alpha[i] * alpha[j] - k_inv[(i, j)];
            let kij = k[(i, j)];
            if i != j {
                for (d, w) in w_ls.iter().enumerate() {
                    let diff = x[i][d] - x[j][d];
                    grad[d] += wij * kij * diff * diff * w;
                }
            }
            grad[p] += wij * kij;
        }
        grad[p + 1] += (alpha[i] * alpha[i] - k_inv[(i, i)]) * h.log_noise_var.exp();
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    Ok((lml, grad))
}

/// Projected gradient ascent with an adaptive step.
fn ascend(x: &[Vec<f64>], y: &[f64], start: GpHyper, config: &GpConfig) -> Result<(GpHyper, f64), MetaError> {
    let scale = 1.0 / y.len() as f64;
    let mut theta = start.to_vec();
    GpHyper::clamp(&mut theta);
    let (mut f, mut g) = log_marginal_likelihood_grad(x, y, &GpHyper::from_vec(&theta))?;
    let mut step = 0.5;
    for _ in 0..config.max_iters {
        let mut accepted = None;
        while step > 1e-10 {
            let mut next: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + step * scale * gi).collect();
            GpHyper::clamp(&mut next);
            if next == theta {
                break;
            }
            match log_marginal_likelihood_grad(x, y, &GpHyper::from_vec(&next)) {
                Ok((fn_, gn)) if fn_ > f => {
                    accepted = Some((next, fn_, gn));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        let Some((next, fn_, gn)) = accepted else { break };
        let gain = fn_ - f;
        theta = next;
        f = fn_;
        g = gn;
        step *= 1.5;
        if gain <= config.tol * (1.0 + f.abs()) {
            break;
        }
    }
    Ok((GpHyper::from_vec(&theta), f))
}

/// Per-feature affine standardization from training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let p = x.first().map_or(0, |r| r.len());
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..p).map(|d| x.iter().map(|r| r[d]).sum::<f64>() / n).collect();
        let std = (0..p)
            .map(|d| {
                let v = x.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    /// Standardized and clipped to `±FEATURE_CLIP`.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| ((v - m) / s).clamp(-FEATURE_CLIP, FEATURE_CLIP))
            .collect()
    }
}

/// A fitted GP: scalers, hyperparameters and the cached factorization.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub hyper: GpHyper,
    pub scaler: FeatureScaler,
    pub y_mean: f64,
    pub y_scale: f64,
    pub log_marginal_likelihood: f64,
    x: Vec<Vec<f64>>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Conditions on the data with fixed hyperparameters (given for the
    /// standardized features and targets).
    pub fn with_hyper(x: &[Vec<f64>], y: &[f64], hyper: GpHyper) -> Result<Self, MetaError> {
        validate(x, y, 1)?;
        if hyper.log_lengthscales.len() != x[0].len() {
            return Err(MetaError::Invalid(format!(
                "{} length-scales for {} features",
                hyper.log_lengthscales.len(),
                x[0].len()
            )));
        }
        let scaler = FeatureScaler::fit(x);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
        let (y_mean, y_scale) = target_scaling(y);
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let (_, chol) = factorize(&xs, &hyper)?;
        let alpha = solve(&chol, &ys);
        let lml = log_marginal_likelihood(&xs, &ys, &hyper)?;
        Ok(Self {
            hyper,
            scaler,
            y_mean,
            y_scale,
            log_marginal_likelihood: lml,
            x: xs,
            chol,
            alpha,
        })
    }

    /// Posterior mean and variance at `row`; the variance includes the
    /// observation noise.
    pub fn predict(&self, row: &[f64]) -> (f64, f64) {
        let z = self.scaler.apply(row);
        let w = inv_ls2(&self.hyper);
        let signal = self.hyper.log_signal_var.exp();
        let ks: Vec<f64> = self.x.iter().map(|xi| se_kernel(xi, &z, &w, signal)).collect();
        let mean = ks.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum::<f64>();
        let v = forward_solve(&self.chol, &ks);
        let var = (signal - v.norm_squared()).max(0.0) + self.hyper.log_noise_var.exp();
        let s2 = self.y_scale * self.y_scale;
        (self.y_mean + self.y_scale * mean, (var * s2).max(f64::MIN_POSITIVE))
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

fn validate(x: &[Vec<f64>], y: &[f64], min_rows: usize) -> Result<(), MetaError> {
    if x.len() != y.len() {
        return Err(MetaError::Invalid(format!("{} feature rows for {} targets", x.len(), y.len())));
    }
    if x.len() < min_rows {
        return Err(MetaError::TooFewRows { got: x.len(), min: min_rows });
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(MetaError::Invalid("feature rows must share a nonzero width".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(MetaError::Invalid("non-finite feature or target".into()));
    }
    Ok(())
}

fn target_scaling(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let s = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    (m, if s > 0.0 { s } else { 1.0 })
}

/// Fits hyperparameters by multi-restart ascent of the log marginal
/// likelihood and conditions on the data.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel, MetaError> {
    validate(x, y, MIN_TRAIN_ROWS)?;
    let p = x[0].len();
    let scaler = FeatureScaler::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
    let (y_mean, y_scale) = target_scaling(y);
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
    let mut r = rng::stream(config.seed, &["gp".into()]);
    let mut best: Option<(GpHyper, f64)> = None;
    let mut last_err = None;
    for restart in 0..config.restarts.max(1) {
        let start = if restart == 0 {
            GpHyper {
                log_lengthscales: vec![(p as f64).sqrt().ln(); p],
                log_signal_var: 0.0,
                log_noise_var: 0.1f64.ln(),
            }
        } else {
            GpHyper {
                log_lengthscales: (0..p).map(|_| r.random_range(-1.0..2.5)).collect(),
                log_signal_var: r.random_range(-2.3..2.3),
                log_noise_var: r.random_range(-6.9..0.0),
            }
        };
        match ascend(&xs, &ys, start, config) {
            Ok((h, f)) => {
                if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
                    best = Some((h, f));
                }
            }
            Err(e) => {
                log::debug!("GP restart {restart} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    let (hyper, _) = best.ok_or_else(|| last_err.unwrap_or(MetaError::Factorization("no restart succeeded".into())))?;
    let (_, chol) = factorize(&xs, &hyper)?;
    let alpha = solve(&chol, &ys);
    let lml = log_marginal_likelihood(&xs, &ys, &hyper)?;
    Ok(GpModel {
        hyper,
        scaler,
        y_mean,
        y_scale,
        log_marginal_likelihood: lml,
        x: xs,
        chol,
        alpha,
    })
}

/// Log marginal likelihood at the default starting point, for ascent checks.
pub fn initial_log_marginal_likelihood(x: &[Vec<f64>], y: &[f64]) -> Result<f64, MetaError> {
    validate(x, y, 1)?;
    let p = x[0].len();
    let scaler = FeatureScaler::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
    let (m, s) = target_scaling(y);
    let ys: Vec<f64> = y.iter().map(|v| (v - m) / s).collect();
    let h = GpHyper {
        log_lengthscales: vec![(p as f64).sqrt().ln(); p],
        log_signal_var: 0.0,
        log_noise_var: 0.1f64.ln(),
    };
    log_marginal_likelihood(&xs, &ys, &h)
}
