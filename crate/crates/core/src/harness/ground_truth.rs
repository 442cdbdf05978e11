use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::store::{read_json, read_matrix, sanitize, write_json, write_matrix};
use super::HarnessError;
use crate::density::BenchmarkDensity;
use crate::metrics::Standardizer;
use crate::rng;
use crate::SampleMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthHeader {
    pub example: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
    /// Cached per-dimension mean and (n - 1) standard deviation.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Exact iid draws from an example, with cached standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub header: GroundTruthHeader,
    pub samples: SampleMatrix,
}

/// Draws `n` exact samples with a stream seeded by `seed`.
pub fn generate_ground_truth(density: &BenchmarkDensity, n: usize, seed: u64) -> GroundTruth {
    let samples = density.sample_exact(n, &mut rng::from_seed(seed));
    let (mean, std) = samples.column_mean_std();
    GroundTruth {
        header: GroundTruthHeader {
            example: density.name().to_string(),
            seed,
            n,
            dim: density.dim(),
            mean,
            std,
        },
        samples,
    }
}

impl GroundTruth {
    pub fn standardizer(&self) -> Standardizer {
        Standardizer {
            mean: self.header.mean.clone(),
            std: self.header.std.clone(),
        }
    }

    fn paths(dir: &Path, example: &str) -> (PathBuf, PathBuf) {
        let stem = dir.join(sanitize(example));
        (stem.with_extension("bin"), stem.with_extension("json"))
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        let (bin, json) = Self::paths(dir, &self.header.example);
        write_matrix(&bin, &self.samples)?;
        write_json(&json, &self.header)
    }

    pub fn load(dir: &Path, example: &str) -> Result<Self, HarnessError> {
        let (bin, json) = Self::paths(dir, example);
        let header: GroundTruthHeader = read_json(&json)?;
        let samples = read_matrix(&bin, header.dim, header.n)?;
        Ok(Self { header, samples })
    }
}
