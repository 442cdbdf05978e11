//! Budgeted multi-chain runs, ground truth, scoring and summaries.
//!
//! A run executes every configured sampler on every example for `k`
//! chains. Each chain sees only a [`BlackBoxView`](crate::density::BlackBoxView)
//! and stops when its budget (evaluations or thread CPU seconds) runs out,
//! recording a checkpoint each time another `1/checkpoints` of the budget
//! has been consumed. Scoring compares chain prefixes at every checkpoint
//! with a large set of exact draws.

mod config;
mod ground_truth;
mod run;
mod score;
mod store;

use std::path::Path;

use thiserror::Error;

pub use config::{resolve_example, Budget, RunConfig, DEFAULT_GROUND_TRUTH_DRAWS};
pub use ground_truth::{generate_ground_truth, GroundTruth, GroundTruthHeader};
pub use run::{
    chain_seed, chains_dir, examples_dir, generate_all_ground_truth, ground_truth_dir, ground_truth_seed, run_benchmark,
    run_chain, run_pair, thread_cpu_seconds, Manifest, ManifestChain, ManifestExample, RunArtifacts, MANIFEST_FILE,
};
pub use score::{
    score_runs, score_runs_with_diagnostics, summarize, DiagnosticsRow, KindSummary, Quartiles, SamplerSummary, Summary,
};
pub use store::{read_json, read_matrix, sanitize, write_json, write_matrix, Chain, ChainHeader, Checkpoint};

use crate::density::DensityError;
use crate::metrics::{MetricsError, ScoreTable};

pub const SCORES_FILE: &str = "scores.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path} is corrupt: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("no ground truth for example {0:?}")]
    MissingGroundTruth(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), HarnessError> {
    let err = |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>, HarnessError> {
    let err = |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    };
    csv::Reader::from_path(path)
        .map_err(err)?
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(err)
}

/// Scores a saved or in-memory run and writes the score table, the
/// diagnostics table and the summary into `dir`.
pub fn score_and_write(artifacts: &RunArtifacts, dir: &Path) -> Result<(ScoreTable, Summary), HarnessError> {
    let (table, diagnostics) = score_runs_with_diagnostics(artifacts)?;
    table.save(dir.join(SCORES_FILE))?;
    write_diagnostics(&dir.join(DIAGNOSTICS_FILE), &diagnostics)?;
    let summary = summarize(&table);
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok((table, summary))
}

/// Full pipeline: resolve examples, draw ground truth, run all chains,
/// store everything under `config.output_dir`, score and summarize.
pub fn execute(config: &RunConfig, base_dir: Option<&Path>) -> Result<(RunArtifacts, ScoreTable, Summary), HarnessError> {
    config.validate()?;
    let densities = config.resolve_examples(base_dir)?;
    let dir = config.output_dir.clone();
    store::ensure_dir(&dir)?;
    let artifacts = run_benchmark(densities, config);
    artifacts.save(&dir)?;
    let (table, summary) = score_and_write(&artifacts, &dir)?;
    Ok((artifacts, table, summary))
}
