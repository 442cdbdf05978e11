//! Mixture-of-Gaussians surrogates fitted to chain data.
//!
//! A surrogate turns a long reference chain into a benchmark density whose
//! moments and samples are known exactly. Complexity is chosen by k-fold
//! cross-validation on the first 80% of the chain; the final 20% is held
//! out and scored.

mod em;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use em::{run_em, EmFit};

use crate::density::{AffineTransform, BenchmarkDensity, DensityError, MixtureOfGaussians};
use crate::rng::{self, Rng};
use crate::SampleMatrix;

/// Fraction of the chain, taken from the end, held out for scoring.
pub const HELDOUT_FRACTION: f64 = 0.2;

/// Rows required per dimension before a surrogate fit is attempted.
pub const MIN_ROWS_PER_DIM: usize = 50;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("need at least {min} rows, got {n}")]
    InsufficientData { n: usize, min: usize },
    #[error("dimension {0} has zero standard deviation; cannot standardize")]
    ZeroStd(usize),
    #[error("degenerate mixture fit: {0}")]
    Degenerate(String),
    #[error("every candidate component count failed to fit")]
    AllCandidatesFailed,
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub component_grid: Vec<usize>,
    pub cv_folds: usize,
    pub max_em_iters: usize,
    /// Relative change in training log-likelihood that ends EM.
    pub em_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            component_grid: vec![1, 2, 5, 10, 25],
            cv_folds: 5,
            max_em_iters: 200,
            em_tol: 1e-6,
            restarts: 5,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.component_grid.is_empty() || self.component_grid.contains(&0) {
            return Err(SurrogateError::Config("component_grid must be nonempty with entries >= 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(SurrogateError::Config(format!("cv_folds must be >= 2, got {}", self.cv_folds)));
        }
        if self.max_em_iters == 0 || self.restarts == 0 {
            return Err(SurrogateError::Config("max_em_iters and restarts must be >= 1".into()));
        }
        if !(self.em_tol > 0.0) {
            return Err(SurrogateError::Config(format!("em_tol must be positive, got {}", self.em_tol)));
        }
        Ok(())
    }

    /// The grid restricted to at most `floor(n / (10 D))` components. The
    /// smallest entry is always kept.
    pub fn capped_grid(&self, n: usize, dim: usize) -> Vec<usize> {
        let cap = n / (10 * dim.max(1));
        let mut grid: Vec<usize> = self.component_grid.clone();
        grid.sort_unstable();
        grid.dedup();
        let min = grid[0];
        grid.retain(|&c| c <= cap);
        if grid.is_empty() {
            grid.push(min);
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub components: usize,
    /// Mean held-out log-likelihood per point across folds; `None` if any
    /// fold failed to fit.
    pub mean_cv_loglik: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub chosen_components: usize,
    /// Mean log-density of the held-out block under the surrogate, in nats,
    /// in original coordinates.
    pub heldout_loglik_per_point: f64,
    pub candidate_scores: Vec<CandidateScore>,
    /// Map from standardized to original coordinates.
    pub standardization: AffineTransform,
    pub n_train: usize,
    pub n_heldout: usize,
}

/// Fits a `c`-component mixture by EM, keeping the best of
/// `config.restarts` random starts.
pub fn fit_mog_em(
    data: &SampleMatrix,
    c: usize,
    config: &FitConfig,
    rng: &mut Rng,
) -> Result<MixtureOfGaussians, SurrogateError> {
    em::fit_em_best(data, c, config, rng).map(|f| f.model)
}

/// Mean per-point log-density of `data` under `model`.
pub fn heldout_loglik(model: &MixtureOfGaussians, data: &SampleMatrix) -> f64 {
    data.rows().map(|r| model.log_density(r)).sum::<f64>() / data.n_rows() as f64
}

fn rows_of(data: &SampleMatrix, idx: &[usize]) -> SampleMatrix {
    let mut m = SampleMatrix::with_capacity(data.dim(), idx.len());
    for &i in idx {
        m.push_row(data.row(i));
    }
    m
}

/// Cross-validated mean held-out log-likelihood for each grid entry, with
/// folds drawn by a random permutation of the rows.
pub fn cv_scores(data: &SampleMatrix, config: &FitConfig, rng: &mut Rng) -> Result<Vec<CandidateScore>, SurrogateError> {
    config.validate()?;
    let n = data.n_rows();
    let k = config.cv_folds;
    let max_c = *config.component_grid.iter().max().expect("validated");
    if n < k * max_c {
        return Err(SurrogateError::InsufficientData { n, min: k * max_c });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let folds: Vec<(SampleMatrix, SampleMatrix)> = (0..k)
        .map(|f| {
            let (lo, hi) = (f * n / k, (f + 1) * n / k);
            let test: Vec<usize> = perm[lo..hi].to_vec();
            let train: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
            (rows_of(data, &train), rows_of(data, &test))
        })
        .collect();
    let mut grid = config.component_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let jobs: Vec<(usize, usize, u64)> = grid
        .iter()
        .flat_map(|&c| (0..k).map(move |f| (c, f)))
        .map(|(c, f)| (c, f, rng.random()))
        .collect();
    let results: Vec<(usize, Option<f64>)> = jobs
        .par_iter()
        .map(|&(c, f, seed)| {
            let (train, test) = &folds[f];
            let score = fit_mog_em(train, c, config, &mut rng::from_seed(seed))
                .ok()
                .map(|m| heldout_loglik(&m, test));
            (c, score)
        })
        .collect();
    Ok(grid
        .iter()
        .map(|&c| {
            let fold_scores: Option<Vec<f64>> = results.iter().filter(|r| r.0 == c).map(|r| r.1).collect();
            CandidateScore {
                components: c,
                mean_cv_loglik: fold_scores
                    .map(|s| s.iter().sum::<f64>() / s.len() as f64)
                    .filter(|v| v.is_finite()),
            }
        })
        .collect())
}

/// The best-scoring candidate; ties go to the smaller count.
pub fn select_best(scores: &[CandidateScore]) -> Result<usize, SurrogateError> {
    let mut best: Option<(usize, f64)> = None;
    for s in scores {
        if let Some(v) = s.mean_cv_loglik {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((s.components, v));
            }
        }
    }
    best.map(|b| b.0).ok_or(SurrogateError::AllCandidatesFailed)
}

/// Number of components chosen by cross-validation. A singleton grid is
/// returned without fitting.
pub fn cv_select_components(data: &SampleMatrix, config: &FitConfig, rng: &mut Rng) -> Result<usize, SurrogateError> {
    config.validate()?;
    if let [only] = config.component_grid[..] {
        return Ok(only);
    }
    select_best(&cv_scores(data, config, rng)?)
}

/// Chain-order split: first rows for training, the final
/// `ceil(0.2 n)` rows held out.
pub fn temporal_split(data: &SampleMatrix) -> (SampleMatrix, SampleMatrix) {
    let n = data.n_rows();
    let held = (HELDOUT_FRACTION * n as f64).ceil() as usize;
    (data.slice_rows(0, n - held), data.slice_rows(n - held, n))
}

/// Full surrogate pipeline on a chain in original coordinates.
pub fn fit_surrogate(
    chain: &SampleMatrix,
    config: &FitConfig,
    name: &str,
) -> Result<(BenchmarkDensity, FitReport), SurrogateError> {
    config.validate()?;
    let d = chain.dim();
    let min = MIN_ROWS_PER_DIM * d;
    if chain.n_rows() < min {
        return Err(SurrogateError::InsufficientData { n: chain.n_rows(), min });
    }
    let (train, heldout) = temporal_split(chain);
    let (mean, std) = train.column_mean_std();
    if let Some(i) = std.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(SurrogateError::ZeroStd(i));
    }
    let standardization = AffineTransform::new(std, mean)?;
    let mut z = SampleMatrix::with_capacity(d, train.n_rows());
    for r in train.rows() {
        z.push_row(&standardization.invert(r));
    }
    let grid_config = FitConfig {
        component_grid: config.capped_grid(z.n_rows(), d),
        ..config.clone()
    };
    log::info!("surrogate {name}: {} train rows, grid {:?}", z.n_rows(), grid_config.component_grid);
    let (chosen, candidate_scores) = if grid_config.component_grid.len() == 1 {
        (grid_config.component_grid[0], Vec::new())
    } else {
        let scores = cv_scores(&z, &grid_config, &mut rng::stream(config.seed, &["cv".into()]))?;
        (select_best(&scores)?, scores)
    };
    let core = fit_mog_em(&z, chosen, config, &mut rng::stream(config.seed, &["refit".into()]))?;
    let density = BenchmarkDensity::new(name, core, standardization.clone())?;
    let heldout_loglik_per_point =
        heldout.rows().map(|r| density.log_density(r)).sum::<f64>() / heldout.n_rows() as f64;
    Ok((
        density,
        FitReport {
            chosen_components: chosen,
            heldout_loglik_per_point,
            candidate_scores,
            standardization,
            n_train: train.n_rows(),
            n_heldout: heldout.n_rows(),
        },
    ))
}
