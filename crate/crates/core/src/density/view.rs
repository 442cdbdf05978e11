use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::BenchmarkDensity;

/// Failure of a single black-box query.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("contract violation: point has dimension {got}, density has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("contract violation: non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("evaluation budget of {limit} calls exhausted")]
    BudgetExhausted { limit: u64 },
}

impl EvalError {
    pub fn is_budget(&self) -> bool {
        matches!(self, EvalError::BudgetExhausted { .. })
    }
}

/// The only face of a target a sampler ever sees: an unnormalized
/// log-density, its gradient, the dimension and an evaluation counter.
///
/// The gradient query also returns the log-density at the same point, as
/// reverse-mode differentiation does; it counts as one evaluation.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> Result<f64, EvalError>;
    fn grad_log_density(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError>;
    fn evaluations(&self) -> u64;
}

/// Opaque handle on a [`BenchmarkDensity`]. Only the [`LogDensity`] queries
/// are available to callers; the parameters, moments and sampler stay
/// private to the harness.
#[derive(Debug)]
pub struct BlackBoxView {
    density: Arc<BenchmarkDensity>,
    evaluations: AtomicU64,
    limit: AtomicU64,
}

impl BlackBoxView {
    pub fn new(density: Arc<BenchmarkDensity>) -> Self {
        Self {
            density,
            evaluations: AtomicU64::new(0),
            limit: AtomicU64::new(u64::MAX),
        }
    }

    /// Refuse every query once the counter reaches `limit`. Refused queries
    /// are not counted.
    pub fn set_eval_limit(&self, limit: Option<u64>) {
        self.limit.store(limit.unwrap_or(u64::MAX), Ordering::Relaxed);
    }

    fn admit(&self, x: &[f64]) -> Result<(), EvalError> {
        let expected = self.density.dim();
        if x.len() != expected {
            return Err(EvalError::DimensionMismatch { expected, got: x.len() });
        }
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(EvalError::NonFinite { index, value });
        }
        let limit = self.limit.load(Ordering::Relaxed);
        if self.evaluations.load(Ordering::Relaxed) >= limit {
            return Err(EvalError::BudgetExhausted { limit });
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }
}

impl LogDensity for BlackBoxView {
    fn dim(&self) -> usize {
        self.density.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.admit(x)?;
        Ok(self.density.log_density(x))
    }

    fn grad_log_density(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        self.admit(x)?;
        Ok(self.density.log_density_and_grad(x))
    }

    fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> Result<f64, EvalError> {
        (**self).log_density(x)
    }
    fn grad_log_density(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        (**self).grad_log_density(x)
    }
    fn evaluations(&self) -> u64 {
        (**self).evaluations()
    }
}
