use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;

use super::{FitConfig, SurrogateError};
use crate::density::MixtureOfGaussians;
use crate::linalg::{cholesky_with_jitter, log_sum_exp};
use crate::rng::{self, Rng};
use crate::SampleMatrix;

/// Result of one EM run.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: MixtureOfGaussians,
    /// Total training log-likelihood of `model`.
    pub loglik: f64,
    /// Training log-likelihood after every E-step.
    pub trace: Vec<f64>,
    /// Index into `trace` where degenerate components were pruned, if any.
    pub pruned_at: Option<usize>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<DMatrix<f64>>,
}

impl Params {
    fn drop(&mut self, bad: &[usize]) {
        let keep: Vec<usize> = (0..self.weights.len()).filter(|c| !bad.contains(c)).collect();
        self.weights = keep.iter().map(|&c| self.weights[c]).collect();
        self.means = keep.iter().map(|&c| self.means[c].clone()).collect();
        self.covs = keep.iter().map(|&c| self.covs[c].clone()).collect();
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    /// Indices of components whose covariance is not positive definite as
    /// estimated. Jitter would make such a component factorizable, but the
    /// altered covariance is no longer an M-step maximizer and the
    /// likelihood could then decrease.
    fn unfactorizable(&self) -> Vec<usize> {
        (0..self.covs.len())
            .filter(|&c| self.covs[c].clone().cholesky().is_none())
            .collect()
    }

    fn to_model(&self) -> Result<MixtureOfGaussians, Vec<usize>> {
        let bad = self.unfactorizable();
        if !bad.is_empty() {
            return Err(bad);
        }
        MixtureOfGaussians::from_covariances(self.weights.clone(), self.means.clone(), &self.covs)
            .map_err(|_| (0..self.weights.len()).collect())
    }
}

fn pooled_covariance(data: &SampleMatrix) -> DMatrix<f64> {
    let d = data.dim();
    let n = data.n_rows() as f64;
    let (mean, _) = data.column_mean_std();
    let mut cov = DMatrix::zeros(d, d);
    for r in data.rows() {
        for i in 0..d {
            for j in 0..=i {
                cov[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[(i, j)] /= n;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding of `c` means from data rows.
fn seed_means(data: &SampleMatrix, c: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = data.n_rows();
    let mut means = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = data.rows().map(|r| sq_dist(r, &means[0])).collect();
    while means.len() < c {
        let idx = match WeightedIndex::new(&nearest) {
            Ok(w) => w.sample(rng),
            // every point coincides with a chosen mean
            Err(_) => rng.random_range(0..n),
        };
        let m = data.row(idx).to_vec();
        for (d, r) in nearest.iter_mut().zip(data.rows()) {
            *d = d.min(sq_dist(r, &m));
        }
        means.push(m);
    }
    means
}

fn degenerate(msg: impl Into<String>) -> SurrogateError {
    SurrogateError::Degenerate(msg.into())
}

/// EM from a k-means++ start. Degenerate components are pruned once and
/// the run continues from the reduced state; a second degeneracy fails.
pub fn run_em(data: &SampleMatrix, c: usize, config: &FitConfig, rng: &mut Rng) -> Result<EmFit, SurrogateError> {
    let n = data.n_rows();
    let d = data.dim();
    let pooled = pooled_covariance(data);
    let mut params = Params {
        weights: vec![1.0 / c as f64; c],
        means: seed_means(data, c, rng),
        covs: vec![pooled.clone(); c],
    };
    if cholesky_with_jitter(&pooled).is_err() {
        return Err(degenerate("data covariance is singular"));
    }
    let min_mass = 0.1; // weight below 1/(10 n)
    let mut may_prune = true;
    let mut pruned_at = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut resp = vec![0.0; n * c];
    let mut lc = vec![0.0; c];

    // one pass more than the cap, since a prune pass records no likelihood
    for _ in 0..=config.max_em_iters {
        let model = match params.to_model() {
            Ok(m) => m,
            Err(bad) => {
                if may_prune && bad.len() < params.weights.len() {
                    params.drop(&bad);
                    may_prune = false;
                    pruned_at = Some(trace.len());
                    continue;
                }
                return Err(degenerate("covariance repair failed"));
            }
        };
        let k = model.n_components();
        resp.resize(n * k, 0.0);
        lc.resize(k, 0.0);

        let mut ll = 0.0;
        for (i, r) in data.rows().enumerate() {
            model.component_log_densities(r, &mut lc);
            let lse = log_sum_exp(&lc);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (lc[j] - lse).exp();
            }
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(p) = prev {
            if pruned_at != Some(trace.len() - 1) && (ll - p).abs() <= config.em_tol * p.abs() {
                return Ok(EmFit {
                    model,
                    loglik: ll,
                    trace,
                    pruned_at,
                    converged: true,
                });
            }
        }
        if trace.len() == config.max_em_iters {
            return Ok(EmFit {
                model,
                loglik: ll,
                trace,
                pruned_at,
                converged: false,
            });
        }

        // M-step
        let mass: Vec<f64> = (0..k).map(|j| (0..n).map(|i| resp[i * k + j]).sum()).collect();
        let bad: Vec<usize> = (0..k).filter(|&j| mass[j] < min_mass).collect();
        if !bad.is_empty() {
            if may_prune && bad.len() < k {
                params.drop(&bad);
                may_prune = false;
                pruned_at = Some(trace.len());
                continue;
            }
            return Err(degenerate(format!("{} component(s) lost all mass", bad.len())));
        }
        let mut means = vec![vec![0.0; d]; k];
        for (i, r) in data.rows().enumerate() {
            for j in 0..k {
                let w = resp[i * k + j];
                for (m, x) in means[j].iter_mut().zip(r) {
                    *m += w * x;
                }
            }
        }
        for (m, s) in means.iter_mut().zip(&mass) {
            m.iter_mut().for_each(|v| *v /= s);
        }
        let mut covs = vec![DMatrix::zeros(d, d); k];
        let mut diff = vec![0.0; d];
        for (i, r) in data.rows().enumerate() {
            for j in 0..k {
                let w = resp[i * k + j];
                for a in 0..d {
                    diff[a] = r[a] - means[j][a];
                }
                let cov = &mut covs[j];
                for a in 0..d {
                    for b in 0..=a {
                        cov[(a, b)] += w * diff[a] * diff[b];
                    }
                }
            }
        }
        for (cov, s) in covs.iter_mut().zip(&mass) {
            for a in 0..d {
                for b in 0..=a {
                    cov[(a, b)] /= s;
                    cov[(b, a)] = cov[(a, b)];
                }
            }
        }
        params = Params {
            weights: mass.iter().map(|m| m / n as f64).collect(),
            means,
            covs,
        };
    }
    Err(degenerate("EM made no progress"))
}

/// Best of `config.restarts` EM runs by training log-likelihood. Restarts run
/// in parallel on seeds drawn up front from `rng`.
pub fn fit_em_best(data: &SampleMatrix, c: usize, config: &FitConfig, rng: &mut Rng) -> Result<EmFit, SurrogateError> {
    if data.n_rows() < 2 * c {
        return Err(SurrogateError::InsufficientData {
            n: data.n_rows(),
            min: 2 * c,
        });
    }
    let seeds: Vec<u64> = (0..config.restarts.max(1)).map(|_| rng.random()).collect();
    let runs: Vec<Result<EmFit, SurrogateError>> = seeds
        .par_iter()
        .map(|&s| run_em(data, c, config, &mut rng::from_seed(s)))
        .collect();
    let mut best: Option<EmFit> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart"))
}
