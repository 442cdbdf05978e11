//! Benchmark target densities.
//!
//! A [`BenchmarkDensity`] is a mixture of Gaussians living in a standardized
//! space, pushed to original coordinates by a per-dimension affine map. It
//! has two faces: the harness uses it directly (exact draws, analytic
//! moments, marginal CDFs), while samplers only ever receive a
//! [`BlackBoxView`] exposing log-density and gradient queries.

mod affine;
mod bundled;
mod io;
mod mixture;
mod view;

use thiserror::Error;

use crate::matrix::SampleMatrix;
use crate::rng::Rng;

pub use affine::AffineTransform;
pub use bundled::{bundled, bundled_by_name, BUNDLED_NAMES};
pub use io::{load_density, save_density, DensityFile};
pub use mixture::MixtureOfGaussians;
pub use view::{BlackBoxView, EvalError, LogDensity};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("invalid density: {0}")]
    Invalid(String),
    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("dimension index {index} out of range for a {dim}-dimensional density")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("unknown bundled density {0:?}")]
    UnknownBundled(String),
    #[error("density file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("density file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A benchmark example: mixture core in standardized space plus the map back
/// to original scale. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDensity {
    name: String,
    core: MixtureOfGaussians,
    destandardize: AffineTransform,
    ground_truth_mean: Vec<f64>,
    ground_truth_var: Vec<f64>,
    log_jacobian: f64,
}

impl BenchmarkDensity {
    pub fn new(
        name: impl Into<String>,
        core: MixtureOfGaussians,
        destandardize: AffineTransform,
    ) -> Result<Self, DensityError> {
        if core.dim() != destandardize.dim() {
            return Err(DensityError::Invalid(format!(
                "mixture has dimension {} but the affine map has {}",
                core.dim(),
                destandardize.dim()
            )));
        }
        let (zm, zv) = core.moments();
        let ground_truth_mean = destandardize.apply(&zm);
        let ground_truth_var = zv
            .iter()
            .zip(destandardize.scale())
            .map(|(v, s)| v * s * s)
            .collect();
        let log_jacobian = destandardize.log_jacobian();
        Ok(Self {
            name: name.into(),
            core,
            destandardize,
            ground_truth_mean,
            ground_truth_var,
            log_jacobian,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.core.dim()
    }

    pub fn core(&self) -> &MixtureOfGaussians {
        &self.core
    }

    pub fn destandardize(&self) -> &AffineTransform {
        &self.destandardize
    }

    /// Normalized log-density in original coordinates.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.core.log_density(&self.destandardize.invert(x)) - self.log_jacobian
    }

    /// Log-density and gradient in original coordinates.
    pub fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (lp, gz) = self.core.log_density_and_grad(&self.destandardize.invert(x));
        let g = gz.iter().zip(self.destandardize.scale()).map(|(g, s)| g / s).collect();
        (lp - self.log_jacobian, g)
    }

    /// `n` iid draws in original scale.
    pub fn sample_exact(&self, n: usize, rng: &mut Rng) -> SampleMatrix {
        let mut out = SampleMatrix::with_capacity(self.dim(), n);
        for _ in 0..n {
            let (_, z) = self.core.sample(rng);
            out.push_row(&self.destandardize.apply(&z));
        }
        out
    }

    /// Exact draws together with their generating component labels.
    pub fn sample_exact_labeled(&self, n: usize, rng: &mut Rng) -> (SampleMatrix, Vec<usize>) {
        let mut out = SampleMatrix::with_capacity(self.dim(), n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (c, z) = self.core.sample(rng);
            out.push_row(&self.destandardize.apply(&z));
            labels.push(c);
        }
        (out, labels)
    }

    /// Exact marginal CDF of coordinate `d`.
    pub fn marginal_cdf(&self, d: usize, a: f64) -> Result<f64, DensityError> {
        if d >= self.dim() {
            return Err(DensityError::IndexOutOfRange { index: d, dim: self.dim() });
        }
        let z = (a - self.destandardize.shift()[d]) / self.destandardize.scale()[d];
        Ok(self.core.marginal_cdf(d, z))
    }

    /// Analytic mean and per-dimension variance in original scale.
    pub fn true_moments(&self) -> (Vec<f64>, Vec<f64>) {
        (self.ground_truth_mean.clone(), self.ground_truth_var.clone())
    }

    pub fn ground_truth_mean(&self) -> &[f64] {
        &self.ground_truth_mean
    }

    pub fn ground_truth_var(&self) -> &[f64] {
        &self.ground_truth_var
    }
}
