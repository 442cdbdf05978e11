use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::MetaError;
use crate::harness::DiagnosticsRow;
use crate::metrics::{EstimatorKind, ScoreTable};
use crate::rng;

/// Floor applied to `|GR - 1|` and `|G|` before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

pub const N_FEATURES: usize = 4;

/// Column names, in feature order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["log_ess", "log_abs_gr_minus_1", "log_abs_geweke", "dim"];

/// Ablation labels, in feature order.
pub const FEATURE_LABELS: [&str; N_FEATURES] = ["ESS", "GR", "G", "D"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRow {
    pub example: String,
    pub sampler: String,
    pub features: [f64; N_FEATURES],
    /// ESSD of the mean estimator.
    pub target: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub rows: Vec<MetaRow>,
    /// Rows dropped because the ESSD was clamped or RESS infinite.
    pub excluded_flagged: usize,
    /// Rows dropped for missing or non-finite diagnostics.
    pub excluded_nonfinite: usize,
}

/// Feature vector from raw diagnostics.
pub fn features(ess: f64, gelman_rubin: f64, geweke: f64, dim: usize) -> [f64; N_FEATURES] {
    [
        ess.ln(),
        (gelman_rubin - 1.0).abs().max(LOG_FLOOR).ln(),
        geweke.abs().max(LOG_FLOOR).ln(),
        dim as f64,
    ]
}

impl MetaDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn examples(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.example.as_str()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Feature rows restricted to the columns in `cols`.
    pub fn design(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| cols.iter().map(|&c| r.features[c]).collect()).collect()
    }
}

/// One row per (example, sampler) at the pair's final checkpoint: features
/// from the per-dimension diagnostics, target from the multivariate mean
/// ESSD.
///
/// Diagnostics combine across dimensions as in scoring: the harmonic mean
/// of per-chain ESS, the worst Gelman-Rubin and the largest Geweke `|z|`.
pub fn build_meta_dataset(table: &ScoreTable, diagnostics: &[DiagnosticsRow]) -> MetaDataset {
    let mut diag: BTreeMap<(&str, &str, usize), Vec<&DiagnosticsRow>> = BTreeMap::new();
    for d in diagnostics {
        diag.entry((&d.example, &d.sampler, d.checkpoint)).or_default().push(d);
    }
    let mut out = MetaDataset::default();
    let mut seen = BTreeSet::new();
    for r in &table.rows {
        if !seen.insert((r.example.as_str(), r.sampler.as_str())) {
            continue;
        }
        let Some(last) = table
            .rows
            .iter()
            .filter(|x| x.example == r.example && x.sampler == r.sampler && !x.absent)
            .map(|x| x.checkpoint)
            .max()
        else {
            out.excluded_nonfinite += 1;
            continue;
        };
        let Some(row) = table
            .rows
            .iter()
            .find(|x| x.example == r.example && x.sampler == r.sampler && x.checkpoint == last && x.kind == EstimatorKind::MeanMv)
        else {
            out.excluded_nonfinite += 1;
            continue;
        };
        if row.essd_flagged {
            out.excluded_flagged += 1;
            continue;
        }
        let Some(ds) = diag.get(&(r.example.as_str(), r.sampler.as_str(), last)) else {
            out.excluded_nonfinite += 1;
            continue;
        };
        let dim = ds.len();
        let ess = dim as f64 / ds.iter().map(|d| d.k as f64 / d.ess).sum::<f64>();
        let gr = ds
            .iter()
            .map(|d| d.gelman_rubin)
            .fold(f64::NAN, |a, g| if a.is_nan() || (g - 1.0).abs() > (a - 1.0).abs() { g } else { a });
        let gw = ds.iter().map(|d| d.geweke).fold(f64::NAN, |a, g| if a.is_nan() || g.abs() > a.abs() { g } else { a });
        let f = features(ess, gr, gw, dim);
        if !(f.iter().all(|v| v.is_finite()) && row.essd.is_finite()) {
            out.excluded_nonfinite += 1;
            continue;
        }
        out.rows.push(MetaRow {
            example: r.example.clone(),
            sampler: r.sampler.clone(),
            features: f,
            target: row.essd,
        });
    }
    if out.excluded_flagged + out.excluded_nonfinite > 0 {
        log::info!(
            "meta dataset: {} rows, {} flagged and {} non-finite excluded",
            out.rows.len(),
            out.excluded_flagged,
            out.excluded_nonfinite
        );
    }
    out
}

/// Minimum number of distinct examples for a split.
pub const MIN_SPLIT_EXAMPLES: usize = 5;

/// Random split of example ids; `ceil(test_frac * examples)` of them go to
/// the test side together with all their rows.
pub fn split_by_example(data: &MetaDataset, test_frac: f64, seed: u64) -> Result<(MetaDataset, MetaDataset), MetaError> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(MetaError::Invalid(format!("test fraction must lie in (0, 1), got {test_frac}")));
    }
    let mut ids: Vec<&str> = data.examples().into_iter().collect();
    if ids.len() < MIN_SPLIT_EXAMPLES {
        return Err(MetaError::TooFewExamples {
            got: ids.len(),
            min: MIN_SPLIT_EXAMPLES,
        });
    }
    ids.shuffle(&mut rng::stream(seed, &["split".into()]));
    let n_test = ((test_frac * ids.len() as f64).ceil() as usize).min(ids.len() - 1);
    let test_ids: BTreeSet<&str> = ids[..n_test].iter().copied().collect();
    let (test, train): (Vec<MetaRow>, Vec<MetaRow>) =
        data.rows.iter().cloned().partition(|r| test_ids.contains(r.example.as_str()));
    let side = |rows| MetaDataset {
        rows,
        ..MetaDataset::default()
    };
    Ok((side(train), side(test)))
}
