//! On-disk layout: row-major little-endian `f64` matrices with a JSON
//! sidecar carrying the header.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::SampleMatrix;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// File-name-safe form of an identifier.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_matrix(path: &Path, m: &SampleMatrix) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let f = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for v in m.as_flat() {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_matrix(path: &Path, dim: usize, rows: usize) -> Result<SampleMatrix, HarnessError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != rows * dim * 8 {
        return Err(HarnessError::Corrupt {
            path: path.display().to_string(),
            reason: format!("expected {} bytes for {rows}x{dim}, found {}", rows * dim * 8, bytes.len()),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(SampleMatrix::from_flat(dim, data))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Budget consumed when a checkpoint was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub rows: usize,
    pub evaluations: u64,
    /// Thread CPU seconds; recorded in wall-clock mode only so that
    /// deterministic runs produce identical files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub example: String,
    pub sampler: String,
    pub chain: usize,
    pub seed: u64,
    pub dim: usize,
    pub rows: usize,
    /// Rows appended per transition (walkers for ensembles).
    pub rows_per_step: usize,
    /// Evaluations spent on initialization, outside the budget.
    pub init_evaluations: u64,
    /// Budgeted evaluations consumed.
    pub evaluations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_seconds: Option<f64>,
    pub transitions: u64,
    pub accept_rate: f64,
    /// First row produced after adaptation was frozen.
    pub adapt_end_row: usize,
    pub checkpoints: Vec<Checkpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// A stored chain with its checkpoint boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub header: ChainHeader,
    pub samples: SampleMatrix,
}

impl Chain {
    pub fn failed(&self) -> bool {
        self.header.failure.is_some()
    }

    /// Row count at checkpoint `j` (1-based).
    pub fn rows_at(&self, j: usize) -> usize {
        self.header.checkpoints[j - 1].rows
    }

    pub fn file_stem(example: &str, sampler: &str, chain: usize) -> String {
        format!("{}/{}/chain_{chain:03}", sanitize(example), sanitize(sampler))
    }

    fn paths(dir: &Path, example: &str, sampler: &str, chain: usize) -> (PathBuf, PathBuf) {
        let stem = dir.join(Self::file_stem(example, sampler, chain));
        (stem.with_extension("bin"), stem.with_extension("json"))
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        let h = &self.header;
        let (bin, json) = Self::paths(dir, &h.example, &h.sampler, h.chain);
        write_matrix(&bin, &self.samples)?;
        write_json(&json, h)
    }

    pub fn load(dir: &Path, example: &str, sampler: &str, chain: usize) -> Result<Self, HarnessError> {
        let (bin, json) = Self::paths(dir, example, sampler, chain);
        let header: ChainHeader = read_json(&json)?;
        let samples = read_matrix(&bin, header.dim, header.rows)?;
        Ok(Self { header, samples })
    }
}
