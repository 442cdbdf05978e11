//! Ground-truth benchmarking of MCMC samplers.
//!
//! Targets with hidden parameters are handed to samplers as black boxes;
//! the harness then scores the resulting chains against exact draws and
//! relates the traditional diagnostics to the real estimation error.

pub mod density;
pub mod diagnostics;
pub mod harness;
pub mod linalg;
pub mod meta;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod surrogate;

pub use matrix::SampleMatrix;
