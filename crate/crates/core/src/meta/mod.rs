//! Meta-analysis: how well do the traditional diagnostics predict the real
//! estimation error?
//!
//! Each (example, sampler) pair contributes one row whose features are
//! log ESS, `log|GR - 1|`, `log|G|` and the dimension, and whose target is
//! the ESSD of the mean estimator. A Gaussian process is compared with
//! feature ablations, linear regression and an iid normal on a split by
//! example, with paired t-tests on per-row losses.

mod dataset;
mod eval;
mod gp;

use thiserror::Error;

pub use dataset::{
    build_meta_dataset, features, split_by_example, MetaDataset, MetaRow, FEATURE_LABELS, FEATURE_NAMES, LOG_FLOOR,
    MIN_SPLIT_EXAMPLES, N_FEATURES,
};
pub use eval::{evaluate_models, gaussian_nll, method_names, paired_t_test, MetaReport, ModelResult, TTest};
pub use gp::{
    gp_fit, initial_log_marginal_likelihood, log_marginal_likelihood, log_marginal_likelihood_grad, FeatureScaler,
    GpConfig, GpHyper, GpModel, FEATURE_CLIP, MIN_TRAIN_ROWS,
};

use serde::{Deserialize, Serialize};

use crate::harness::DiagnosticsRow;
use crate::metrics::ScoreTable;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("need at least {min} rows, got {got}")]
    TooFewRows { got: usize, min: usize },
    #[error("need at least {min} distinct examples to split, got {got}")]
    TooFewExamples { got: usize, min: usize },
    #[error("kernel matrix factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub gp: GpConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
            gp: GpConfig::default(),
        }
    }
}

/// Builds the dataset, splits it by example and evaluates every model.
pub fn meta_analyze(
    table: &ScoreTable,
    diagnostics: &[DiagnosticsRow],
    config: &MetaConfig,
) -> Result<(MetaDataset, MetaReport), MetaError> {
    let data = build_meta_dataset(table, diagnostics);
    let (train, test) = split_by_example(&data, config.test_fraction, config.seed)?;
    let gp = GpConfig {
        seed: config.seed,
        ..config.gp.clone()
    };
    let report = evaluate_models(&train, &test, &gp)?;
    Ok((data, report))
}
