use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::DensityError;
use crate::linalg::{cholesky_with_jitter, log_sum_exp};
use crate::rng::Rng;
use crate::special::normal_cdf;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Full-covariance mixture of Gaussians. Covariances are held as lower
/// Cholesky factors (row-major, `dim x dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfGaussians {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    chols: Vec<Vec<f64>>,
    // log w_c - D/2 log(2 pi) - log|L_c|
    log_norms: Vec<f64>,
}

impl MixtureOfGaussians {
    /// Builds a mixture from weights, means and lower Cholesky factors
    /// (`chol_factors[c][i][j]`), validating every invariant.
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        chol_factors: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, DensityError> {
        let c = weights.len();
        if c == 0 {
            return Err(DensityError::Invalid("mixture has no components".into()));
        }
        if means.len() != c || chol_factors.len() != c {
            return Err(DensityError::Invalid(format!(
                "{c} weights but {} means and {} Cholesky factors",
                means.len(),
                chol_factors.len()
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(DensityError::Invalid("zero-dimensional mixture".into()));
        }
        for (k, w) in weights.iter().enumerate() {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(DensityError::Invalid(format!("weight[{k}] = {w} must be strictly positive")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DensityError::Invalid(format!("weights sum to {total:.17}, not 1")));
        }
        let mut chols = Vec::with_capacity(c);
        for (k, (m, l)) in means.iter().zip(&chol_factors).enumerate() {
            if m.len() != dim || m.iter().any(|v| !v.is_finite()) {
                return Err(DensityError::Invalid(format!("mean[{k}] must have {dim} finite entries")));
            }
            if l.len() != dim || l.iter().any(|row| row.len() != dim) {
                return Err(DensityError::Invalid(format!("Cholesky factor[{k}] must be {dim}x{dim}")));
            }
            let mut flat = Vec::with_capacity(dim * dim);
            for (i, row) in l.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(DensityError::Invalid(format!("Cholesky factor[{k}] has non-finite entry")));
                    }
                    if j > i && v != 0.0 {
                        return Err(DensityError::Invalid(format!(
                            "Cholesky factor[{k}] is not lower triangular (entry {i},{j} = {v})"
                        )));
                    }
                    if i == j && !(v > 0.0) {
                        return Err(DensityError::NotPositiveDefinite(format!(
                            "Cholesky factor[{k}] has non-positive diagonal entry {v} at {i}"
                        )));
                    }
                    flat.push(v);
                }
            }
            chols.push(flat);
        }
        Ok(Self::assemble(dim, weights, means, chols))
    }

    /// Builds a mixture from full covariance matrices, factorizing each with
    /// the jitter ladder.
    pub fn from_covariances(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: &[DMatrix<f64>],
    ) -> Result<Self, DensityError> {
        let mut factors = Vec::with_capacity(covariances.len());
        for (k, cov) in covariances.iter().enumerate() {
            let (l, _) = cholesky_with_jitter(cov)
                .map_err(|e| DensityError::NotPositiveDefinite(format!("covariance[{k}]: {e}")))?;
            factors.push((0..l.nrows()).map(|i| (0..l.ncols()).map(|j| l[(i, j)]).collect()).collect());
        }
        Self::new(weights, means, factors)
    }

    fn assemble(dim: usize, weights: Vec<f64>, means: Vec<Vec<f64>>, chols: Vec<Vec<f64>>) -> Self {
        let log_norms = weights
            .iter()
            .zip(&chols)
            .map(|(w, l)| {
                let half_log_det: f64 = (0..dim).map(|i| l[i * dim + i].ln()).sum();
                w.ln() - 0.5 * dim as f64 * (2.0 * PI).ln() - half_log_det
            })
            .collect();
        Self {
            dim,
            weights,
            means,
            chols,
            log_norms,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Cholesky factor of component `c` as nested rows.
    pub fn chol_factor(&self, c: usize) -> Vec<Vec<f64>> {
        self.chols[c].chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn covariance(&self, c: usize) -> DMatrix<f64> {
        let l = DMatrix::from_row_slice(self.dim, self.dim, &self.chols[c]);
        &l * l.transpose()
    }

    /// Whitened residual `y = L_c^{-1} (z - m_c)` written into `y`.
    fn whiten(&self, c: usize, z: &[f64], y: &mut [f64]) {
        let d = self.dim;
        let l = &self.chols[c];
        let m = &self.means[c];
        for i in 0..d {
            let mut s = z[i] - m[i];
            for j in 0..i {
                s -= l[i * d + j] * y[j];
            }
            y[i] = s / l[i * d + i];
        }
    }

    /// `L_c^{-T} y` written into `out`.
    fn unwhiten_transpose(&self, c: usize, y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let l = &self.chols[c];
        for i in (0..d).rev() {
            let mut s = y[i];
            for j in (i + 1)..d {
                s -= l[j * d + i] * out[j];
            }
            out[i] = s / l[i * d + i];
        }
    }

    /// Per-component joint log-densities `log w_c + log N(z; m_c, S_c)`.
    pub fn component_log_densities(&self, z: &[f64], out: &mut [f64]) {
        let mut y = vec![0.0; self.dim];
        for c in 0..self.n_components() {
            self.whiten(c, z, &mut y);
            let q: f64 = y.iter().map(|v| v * v).sum();
            out[c] = self.log_norms[c] - 0.5 * q;
        }
    }

    /// Normalized mixture log-density.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let mut lc = vec![0.0; self.n_components()];
        self.component_log_densities(z, &mut lc);
        log_sum_exp(&lc)
    }

    /// Log-density and its gradient with respect to `z`.
    pub fn log_density_and_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim;
        let nc = self.n_components();
        let mut ys = vec![0.0; nc * d];
        let mut lc = vec![0.0; nc];
        for c in 0..nc {
            let y = &mut ys[c * d..(c + 1) * d];
            self.whiten(c, z, y);
            lc[c] = self.log_norms[c] - 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        }
        let lse = log_sum_exp(&lc);
        let mut grad = vec![0.0; d];
        let mut g = vec![0.0; d];
        for c in 0..nc {
            let r = (lc[c] - lse).exp();
            if r == 0.0 {
                continue;
            }
            self.unwhiten_transpose(c, &ys[c * d..(c + 1) * d], &mut g);
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc -= r * gi;
            }
        }
        (lse, grad)
    }

    /// One exact draw and the index of the component it came from.
    pub fn sample(&self, rng: &mut Rng) -> (usize, Vec<f64>) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = self.n_components() - 1;
        for (c, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = c;
                break;
            }
        }
        let d = self.dim;
        let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.chols[comp];
        let x = (0..d)
            .map(|i| self.means[comp][i] + (0..=i).map(|j| l[i * d + j] * e[j]).sum::<f64>())
            .collect();
        (comp, x)
    }

    /// Analytic mean and per-dimension variance.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut mean = vec![0.0; d];
        let mut second = vec![0.0; d];
        for c in 0..self.n_components() {
            let w = self.weights[c];
            for i in 0..d {
                let m = self.means[c][i];
                mean[i] += w * m;
                second[i] += w * (self.marginal_var(c, i) + m * m);
            }
        }
        let var = second.iter().zip(&mean).map(|(s, m)| s - m * m).collect();
        (mean, var)
    }

    fn marginal_var(&self, c: usize, i: usize) -> f64 {
        let d = self.dim;
        (0..=i).map(|j| self.chols[c][i * d + j].powi(2)).sum()
    }

    /// Marginal CDF of coordinate `i` at `a` (standardized space).
    pub fn marginal_cdf(&self, i: usize, a: f64) -> f64 {
        let p: f64 = (0..self.n_components())
            .map(|c| self.weights[c] * normal_cdf((a - self.means[c][i]) / self.marginal_var(c, i).sqrt()))
            .sum();
        p.clamp(0.0, 1.0)
    }
}
