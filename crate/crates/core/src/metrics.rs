//! Ground-truth scoring: real effective sample size (RESS) for mean,
//! variance and KS estimators, efficiency, normalized ESS and the ESS
//! deviation (ESSD) that compares RESS with the chain-only ESS.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SampleMatrix;
use crate::special::{self, KOLMOGOROV_R};

/// RESS at or above this counts as a success.
pub const SUCCESS_THRESHOLD: f64 = 12.0;
/// ESSD values are clamped to `[-ESSD_CLAMP, ESSD_CLAMP]`.
pub const ESSD_CLAMP: f64 = 8.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ground-truth standard deviation of dimension {0} is not positive")]
    ZeroVariance(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no estimates given")]
    Empty,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("score table {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    MeanD,
    VarD,
    KsD,
    MeanMv,
    VarMv,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [Self::MeanD, Self::VarD, Self::KsD, Self::MeanMv, Self::VarMv];

    /// Constant making RESS tend to `N` for iid draws.
    pub fn r(self) -> f64 {
        match self {
            Self::MeanD | Self::MeanMv => 1.0,
            Self::VarD | Self::VarMv => 2.0,
            Self::KsD => KOLMOGOROV_R,
        }
    }

    pub fn is_multivariate(self) -> bool {
        matches!(self, Self::MeanMv | Self::VarMv)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MeanD => "mean_d",
            Self::VarD => "var_d",
            Self::KsD => "ks_d",
            Self::MeanMv => "mean_mv",
            Self::VarMv => "var_mv",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MetricsError::Invalid(format!("unknown estimator kind {s:?}")))
    }
}

/// Per-dimension mean and standard deviation of the stored ground-truth
/// draws, used to put chains on a common scale before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn from_samples(ground_truth: &SampleMatrix) -> Result<Self, MetricsError> {
        let (mean, std) = ground_truth.column_mean_std();
        if let Some(d) = std.iter().position(|s| !(*s > 0.0)) {
            return Err(MetricsError::ZeroVariance(d));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, samples: &SampleMatrix) -> Result<SampleMatrix, MetricsError> {
        if samples.dim() != self.dim() {
            return Err(MetricsError::DimensionMismatch {
                expected: self.dim(),
                got: samples.dim(),
            });
        }
        let mut out = SampleMatrix::with_capacity(samples.dim(), samples.n_rows());
        let mut buf = vec![0.0; samples.dim()];
        for row in samples.rows() {
            for (d, v) in row.iter().enumerate() {
                buf[d] = (v - self.mean[d]) / self.std[d];
            }
            out.push_row(&buf);
        }
        Ok(out)
    }
}

/// Standardizes `samples` by the mean and std of the ground-truth draws.
pub fn standardize_by_ground_truth(
    samples: &SampleMatrix,
    ground_truth: &SampleMatrix,
) -> Result<SampleMatrix, MetricsError> {
    Standardizer::from_samples(ground_truth)?.apply(samples)
}

/// `R K / sum_k (est_k - truth)^2`; `+inf` when every estimate is exact.
pub fn ress(estimates: &[f64], truth: f64, r: f64) -> Result<f64, MetricsError> {
    if estimates.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sse: f64 = estimates.iter().map(|e| (e - truth).powi(2)).sum();
    Ok(ratio_or_inf(r * estimates.len() as f64, sse))
}

/// `R K D / sum_k ||est_k - truth||^2`.
pub fn ress_multivariate(estimates: &[Vec<f64>], truth: &[f64], r: f64) -> Result<f64, MetricsError> {
    if estimates.is_empty() {
        return Err(MetricsError::Empty);
    }
    let d = truth.len();
    let mut sse = 0.0;
    for e in estimates {
        if e.len() != d {
            return Err(MetricsError::DimensionMismatch { expected: d, got: e.len() });
        }
        sse += e.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(ratio_or_inf(r * (estimates.len() * d) as f64, sse))
}

fn ratio_or_inf(num: f64, sse: f64) -> f64 {
    if sse == 0.0 {
        log::debug!("zero estimation error: RESS is infinite");
        f64::INFINITY
    } else {
        num / sse
    }
}

/// Exact one-sample Kolmogorov-Smirnov distance `sup_a |F_n(a) - F(a)|`,
/// evaluated on both sides of every jump of the empirical CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// KS-based RESS: `R K / sum_k KS_k^2` with `R = pi^2 / 12`.
pub fn ress_ks<S: AsRef<[f64]>>(chains: &[S], cdf: impl Fn(f64) -> f64) -> Result<f64, MetricsError> {
    if chains.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sse: f64 = chains.iter().map(|c| ks_statistic(c.as_ref(), &cdf).powi(2)).sum();
    Ok(ratio_or_inf(KOLMOGOROV_R * chains.len() as f64, sse))
}

pub fn harmonic_mean(n: &[usize]) -> f64 {
    n.len() as f64 / n.iter().map(|&v| 1.0 / v as f64).sum::<f64>()
}

/// RESS divided by the harmonic mean of the per-chain lengths.
pub fn eff(ress: f64, n_per_chain: &[usize]) -> Result<f64, MetricsError> {
    if n_per_chain.is_empty() || n_per_chain.contains(&0) {
        return Err(MetricsError::Invalid("chain lengths must be nonempty and positive".into()));
    }
    Ok(ress / harmonic_mean(n_per_chain))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// RESS divided by the median over samplers of their per-example sample counts.
pub fn ness(ress: f64, per_sampler_n: &[f64]) -> Result<f64, MetricsError> {
    let m = median(per_sampler_n).ok_or(MetricsError::Empty)?;
    Ok(ress / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Essd {
    pub value: f64,
    /// Set when the value was clamped or RESS was infinite.
    pub flagged: bool,
}

/// `Phi^-1(chi2_dof CDF(ESS / RESS * dof))`, clamped to `±ESSD_CLAMP`.
///
/// `ess` is the per-chain ESS and `dof` the number of squared error terms
/// entering the RESS denominator (`K`, or `K D` for multivariate rows).
pub fn essd(ess: f64, ress: f64, dof: usize) -> Result<Essd, MetricsError> {
    if !(ess > 0.0) || !(ress > 0.0) || dof == 0 {
        return Err(MetricsError::Invalid(format!("essd needs ess, ress, dof > 0 (got {ess}, {ress}, {dof})")));
    }
    if ress.is_infinite() {
        return Ok(Essd {
            value: -ESSD_CLAMP,
            flagged: true,
        });
    }
    let k = dof as f64;
    let x = ess / ress * k;
    let cdf = special::chi2_cdf(x, k).map_err(|e| MetricsError::Invalid(e.to_string()))?;
    let raw = if cdf > 0.5 {
        let sf = special::chi2_sf(x, k).map_err(|e| MetricsError::Invalid(e.to_string()))?;
        if sf > 0.0 {
            special::normal_inv_sf(sf).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        }
    } else if cdf > 0.0 {
        special::normal_inv_cdf(cdf).unwrap_or(f64::NEG_INFINITY)
    } else {
        f64::NEG_INFINITY
    };
    let value = raw.clamp(-ESSD_CLAMP, ESSD_CLAMP);
    Ok(Essd {
        value,
        flagged: value != raw,
    })
}

pub fn success(ress: f64) -> bool {
    ress >= SUCCESS_THRESHOLD
}

/// One score: a sampler on an example at a checkpoint, for one estimator
/// on one dimension (or all dimensions for multivariate kinds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub example: String,
    pub sampler: String,
    pub checkpoint: usize,
    pub kind: EstimatorKind,
    /// Dimension index; empty for multivariate rows.
    pub dim: Option<usize>,
    pub k: usize,
    pub n_harmonic: f64,
    pub evaluations: u64,
    pub ress: f64,
    pub eff: f64,
    pub ness: f64,
    pub essd: f64,
    pub essd_flagged: bool,
    pub success: bool,
    /// Per-chain ESS entering the ESSD.
    pub ess: f64,
    pub gelman_rubin: f64,
    pub geweke: f64,
    /// Chains were missing or failed; metrics are NaN.
    pub absent: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    /// Fills `ness` for every row: RESS over the median, across samplers on
    /// the same example and checkpoint, of the harmonic-mean chain length.
    pub fn assign_ness(&mut self) {
        let mut per_group: BTreeMap<(String, usize), BTreeMap<String, f64>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| !r.absent) {
            per_group
                .entry((r.example.clone(), r.checkpoint))
                .or_default()
                .insert(r.sampler.clone(), r.n_harmonic);
        }
        for r in self.rows.iter_mut() {
            let ns: Vec<f64> = per_group
                .get(&(r.example.clone(), r.checkpoint))
                .map(|m| m.values().copied().collect())
                .unwrap_or_default();
            r.ness = if r.absent { f64::NAN } else { ness(r.ress, &ns).unwrap_or(f64::NAN) };
        }
    }

    pub fn final_checkpoint(&self, example: &str, sampler: &str) -> Option<usize> {
        self.rows
            .iter()
            .filter(|r| r.example == example && r.sampler == sampler)
            .map(|r| r.checkpoint)
            .max()
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, csv::Error> {
        let rows = csv::Reader::from_reader(r).deserialize().collect::<Result<Vec<ScoreRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        let path = path.as_ref();
        let err = |source| MetricsError::Csv {
            path: path.display().to_string(),
            source,
        };
        let f = std::fs::File::create(path).map_err(|e| err(e.into()))?;
        self.write_csv(io::BufWriter::new(f)).map_err(err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let err = |source| MetricsError::Csv {
            path: path.display().to_string(),
            source,
        };
        let f = std::fs::File::open(path).map_err(|e| err(e.into()))?;
        Self::read_csv(io::BufReader::new(f)).map_err(err)
    }
}
