//! Sampler kernels. Every kernel reaches the target only through a
//! [`LogDensity`], i.e. the black-box view.
//!
//! Single-chain kernels share a [`Position`] (point, cached log-density and
//! optionally its gradient) and implement [`Kernel`]. The ensemble sampler
//! keeps its own walker state. [`Sampler`] wraps both behind one interface
//! that appends emitted rows to a [`SampleMatrix`].

mod emcee;
mod hmc;
mod init;
mod mix;
mod nuts;
mod rwm;
mod slice;
mod spec;

use rand::Rng as _;
use thiserror::Error;

use crate::density::{EvalError, LogDensity};
use crate::matrix::SampleMatrix;
use crate::rng::Rng;

pub use emcee::Emcee;
pub use hmc::{leapfrog, DualAveraging, Hmc, LeapfrogOutput};
pub use init::{init_chain, ChainInit, InitMode};
pub use mix::Mix;
pub use nuts::Nuts;
pub use rwm::{ProposalFamily, Rwm};
pub use slice::Slice;
pub use spec::{SamplerKind, SamplerSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("all {walkers} walkers are within 1e-12 of each other; re-initialize the ensemble")]
    WalkerCollapse { walkers: usize },
    #[error("initial point has non-finite log-density {0}")]
    BadInitialPoint(f64),
    #[error("invalid sampler specification: {0}")]
    InvalidSpec(String),
}

impl SamplerError {
    pub fn is_budget(&self) -> bool {
        matches!(self, SamplerError::Eval(e) if e.is_budget())
    }
}

/// Current point of a single chain with its cached log-density. `grad` is
/// present only when the last evaluation at `x` produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub x: Vec<f64>,
    pub logp: f64,
    pub grad: Option<Vec<f64>>,
}

impl Position {
    pub fn evaluate(view: &dyn LogDensity, x: Vec<f64>, with_grad: bool) -> Result<Self, SamplerError> {
        let (logp, grad) = if with_grad {
            let (lp, g) = view.grad_log_density(&x)?;
            (lp, Some(g))
        } else {
            (view.log_density(&x)?, None)
        };
        if !logp.is_finite() {
            return Err(SamplerError::BadInitialPoint(logp));
        }
        Ok(Self { x, logp, grad })
    }

    /// Gradient at the current point, evaluating it if not cached.
    pub(crate) fn ensure_grad(&mut self, view: &dyn LogDensity) -> Result<(), SamplerError> {
        if self.grad.is_none() {
            let (lp, g) = view.grad_log_density(&self.x)?;
            self.logp = lp;
            self.grad = Some(g);
        }
        Ok(())
    }
}

/// Per-transition bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    /// Acceptance probability (or its trajectory average for NUTS).
    pub accept_stat: f64,
    pub accepted: bool,
    pub divergent: bool,
    /// Slice shrinkage collapsed on at least one coordinate.
    pub stalled: bool,
    /// Component chosen by a mixture kernel.
    pub component: Option<usize>,
    /// Leapfrog steps taken.
    pub leapfrog_steps: usize,
}

/// A Markov transition on a single chain.
pub trait Kernel: Send {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError>;
    /// End adaptation: all tuning parameters stay constant afterwards.
    fn freeze(&mut self);
    fn needs_grad(&self) -> bool;
    /// Snapshot of every tuning parameter, for freeze checks and logs.
    fn tuning(&self) -> Vec<f64>;
}

/// Metropolis-Hastings decision: accept with probability `min(1, exp(log_ratio))`.
/// One uniform is always consumed. NaN ratios are rejected.
pub fn mh_accept(log_ratio: f64, rng: &mut Rng) -> bool {
    let u: f64 = rng.random();
    if log_ratio.is_nan() {
        log::warn!("NaN log acceptance ratio; rejecting");
        return false;
    }
    u.ln() < log_ratio
}

/// `min(1, exp(log_ratio))`, zero for NaN.
pub fn accept_probability(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    }
}

pub(crate) fn standard_normal(rng: &mut Rng) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}

/// Any single-chain kernel, by kind.
pub enum KernelImpl {
    Rwm(Rwm),
    Hmc(Hmc),
    Nuts(Nuts),
    Slice(Slice),
    Mix(Mix),
}

impl Kernel for KernelImpl {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        match self {
            Self::Rwm(k) => k.transition(pos, view, rng),
            Self::Hmc(k) => k.transition(pos, view, rng),
            Self::Nuts(k) => k.transition(pos, view, rng),
            Self::Slice(k) => k.transition(pos, view, rng),
            Self::Mix(k) => k.transition(pos, view, rng),
        }
    }
    fn freeze(&mut self) {
        match self {
            Self::Rwm(k) => k.freeze(),
            Self::Hmc(k) => k.freeze(),
            Self::Nuts(k) => k.freeze(),
            Self::Slice(k) => k.freeze(),
            Self::Mix(k) => k.freeze(),
        }
    }
    fn needs_grad(&self) -> bool {
        match self {
            Self::Rwm(k) => k.needs_grad(),
            Self::Hmc(k) => k.needs_grad(),
            Self::Nuts(k) => k.needs_grad(),
            Self::Slice(k) => k.needs_grad(),
            Self::Mix(k) => k.needs_grad(),
        }
    }
    fn tuning(&self) -> Vec<f64> {
        match self {
            Self::Rwm(k) => k.tuning(),
            Self::Hmc(k) => k.tuning(),
            Self::Nuts(k) => k.tuning(),
            Self::Slice(k) => k.tuning(),
            Self::Mix(k) => k.tuning(),
        }
    }
}

/// A runnable sampler: a kernel with its chain position, or an ensemble.
pub enum Sampler {
    Single { kernel: KernelImpl, pos: Position },
    Ensemble(Emcee),
}

impl Sampler {
    /// Builds the sampler described by `spec`, starting from `init`. The
    /// initial log-density evaluation goes through `view` and is counted.
    pub fn new(spec: &SamplerSpec, view: &dyn LogDensity, init: &ChainInit) -> Result<Self, SamplerError> {
        spec.validate(view.dim())?;
        if spec.kind == SamplerKind::Emcee {
            return Ok(Self::Ensemble(Emcee::new(spec, view, &init.points)?));
        }
        let kernel = spec.build_kernel(&init.scale_guess)?;
        let pos = Position::evaluate(view, init.points[0].clone(), kernel.needs_grad())?;
        Ok(Self::Single { kernel, pos })
    }

    /// Advances one transition (one sweep for the ensemble) and appends the
    /// emitted rows. Nothing is appended on error.
    pub fn step(&mut self, view: &dyn LogDensity, rng: &mut Rng, out: &mut SampleMatrix) -> Result<StepStats, SamplerError> {
        match self {
            Self::Single { kernel, pos } => {
                let stats = kernel.transition(pos, view, rng)?;
                out.push_row(&pos.x);
                Ok(stats)
            }
            Self::Ensemble(e) => {
                let stats = e.sweep(view, rng)?;
                for w in e.walkers() {
                    out.push_row(w);
                }
                Ok(stats)
            }
        }
    }

    pub fn freeze(&mut self) {
        match self {
            Self::Single { kernel, .. } => kernel.freeze(),
            Self::Ensemble(_) => {}
        }
    }

    pub fn tuning(&self) -> Vec<f64> {
        match self {
            Self::Single { kernel, .. } => kernel.tuning(),
            Self::Ensemble(e) => vec![e.stretch()],
        }
    }

    /// Rows appended per successful step.
    pub fn rows_per_step(&self) -> usize {
        match self {
            Self::Single { .. } => 1,
            Self::Ensemble(e) => e.walkers().len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn mh_accept_limits() {
        let mut r = rng::from_seed(1);
        assert!((0..10_000).all(|_| mh_accept(0.0, &mut r)));
        assert!((0..10_000).all(|_| !mh_accept(f64::NEG_INFINITY, &mut r)));
        assert!(!mh_accept(f64::NAN, &mut r));
        assert!(mh_accept(5.0, &mut r));
    }

    #[test]
    fn mh_accept_rate_is_binomial() {
        let n = 100_000;
        let mut r = rng::from_seed(2);
        let hits = (0..n).filter(|_| mh_accept(0.3f64.ln(), &mut r)).count() as f64;
        let sigma = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((hits - 0.3 * n as f64).abs() < 4.0 * sigma, "{hits}");
    }

    #[test]
    fn accept_probability_values() {
        assert_eq!(accept_probability(1.0), 1.0);
        assert_eq!(accept_probability(f64::NEG_INFINITY), 0.0);
        assert_eq!(accept_probability(f64::NAN), 0.0);
        assert!((accept_probability(0.5f64.ln()) - 0.5).abs() < 1e-15);
    }
}
