use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::RunArtifacts;
use super::store::Chain;
use super::HarnessError;
use crate::density::BenchmarkDensity;
use crate::diagnostics::DiagnosticsRecord;
use crate::metrics::{
    eff, essd, harmonic_mean, median, ress, ress_ks, ress_multivariate, success, EstimatorKind, ScoreRow, ScoreTable,
    Standardizer,
};
use crate::SampleMatrix;

/// Diagnostics of a chain set at one checkpoint, for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub example: String,
    pub sampler: String,
    pub checkpoint: usize,
    pub dim: usize,
    pub k: usize,
    pub n_harmonic: f64,
    /// Multi-chain ESS (sum over chains).
    pub ess: f64,
    pub gelman_rubin: f64,
    pub geweke: f64,
}

/// Running sums of standardized values and their squares, for O(1)
/// prefix means and variances.
struct PrefixSums {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl PrefixSums {
    fn new(col: &[f64]) -> Self {
        let mut s1 = Vec::with_capacity(col.len() + 1);
        let mut s2 = Vec::with_capacity(col.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for v in col {
            a += v;
            b += v * v;
            s1.push(a);
            s2.push(b);
        }
        Self { s1, s2 }
    }

    fn mean(&self, n: usize) -> f64 {
        self.s1[n] / n as f64
    }

    /// Plug-in (divisor n) variance.
    fn var(&self, n: usize) -> f64 {
        let m = self.mean(n);
        (self.s2[n] / n as f64 - m * m).max(0.0)
    }
}

/// Mean and plug-in variance, the estimators applied to chains.
fn mean_var(col: &[f64]) -> (f64, f64) {
    let p = PrefixSums::new(col);
    (p.mean(col.len()), p.var(col.len()))
}

fn absent_row(example: &str, sampler: &str, checkpoint: usize, kind: EstimatorKind, dim: Option<usize>, k: usize) -> ScoreRow {
    ScoreRow {
        example: example.into(),
        sampler: sampler.into(),
        checkpoint,
        kind,
        dim,
        k,
        n_harmonic: f64::NAN,
        evaluations: 0,
        ress: f64::NAN,
        eff: f64::NAN,
        ness: f64::NAN,
        essd: f64::NAN,
        essd_flagged: false,
        success: false,
        ess: f64::NAN,
        gelman_rubin: f64::NAN,
        geweke: f64::NAN,
        absent: true,
    }
}

/// Ground-truth values of every estimator in standardized coordinates.
struct Truth {
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn truth_of(gt: &SampleMatrix, st: &Standardizer) -> Result<Truth, HarnessError> {
    let z = st.apply(gt)?;
    let (mut mean, mut var) = (Vec::new(), Vec::new());
    for d in 0..z.dim() {
        let (m, v) = mean_var(&z.column(d));
        mean.push(m);
        var.push(v);
    }
    Ok(Truth { mean, var })
}

fn pick_worst(values: impl Iterator<Item = f64>, distance: impl Fn(f64) -> f64) -> f64 {
    values
        .filter(|v| !v.is_nan())
        .fold(f64::NAN, |acc, v| if acc.is_nan() || distance(v) > distance(acc) { v } else { acc })
}

/// Scores one (example, sampler) pair at every checkpoint.
fn score_pair(
    density: &BenchmarkDensity,
    st: &Standardizer,
    truth: &Truth,
    sampler: &str,
    chains: &[&Chain],
    checkpoints: usize,
    k_expected: usize,
) -> Result<(Vec<ScoreRow>, Vec<DiagnosticsRow>), HarnessError> {
    let example = density.name();
    let dim = density.dim();
    let k = chains.len();
    let mut rows = Vec::new();
    let mut diag_rows = Vec::new();
    let all_absent = |rows: &mut Vec<ScoreRow>, j: usize| {
        for kind in EstimatorKind::ALL {
            if kind.is_multivariate() {
                rows.push(absent_row(example, sampler, j, kind, None, k_expected));
            } else {
                for d in 0..dim {
                    rows.push(absent_row(example, sampler, j, kind, Some(d), k_expected));
                }
            }
        }
    };
    if k == 0 {
        for j in 1..=checkpoints {
            all_absent(&mut rows, j);
        }
        return Ok((rows, diag_rows));
    }
    let stride = chains[0].header.rows_per_step;
    let standardized: Vec<SampleMatrix> = chains.iter().map(|c| st.apply(&c.samples)).collect::<Result<_, _>>()?;
    let sums: Vec<Vec<PrefixSums>> = standardized
        .iter()
        .map(|z| (0..dim).map(|d| PrefixSums::new(&z.column(d))).collect())
        .collect();
    let raw_cols: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| (0..dim).map(|d| c.samples.column(d)).collect()).collect();
    let cdfs: Vec<_> = (0..dim).map(|d| move |a: f64| density.marginal_cdf(d, a).expect("dimension in range")).collect();
    let matrices: Vec<&SampleMatrix> = chains.iter().map(|c| &c.samples).collect();

    for j in 1..=checkpoints {
        let prefix: Vec<usize> = chains.iter().map(|c| c.rows_at(j)).collect();
        if prefix.iter().any(|&n| n < 2) {
            all_absent(&mut rows, j);
            continue;
        }
        let n_h = harmonic_mean(&prefix);
        let evaluations = chains.iter().map(|c| c.header.checkpoints[j - 1].evaluations).sum::<u64>() / k as u64;
        let rec = DiagnosticsRecord::compute_strided(&matrices, &prefix, stride);
        let ess_per_chain: Vec<f64> = rec.ess.iter().map(|e| e / k as f64).collect();
        for d in 0..dim {
            diag_rows.push(DiagnosticsRow {
                example: example.into(),
                sampler: sampler.into(),
                checkpoint: j,
                dim: d,
                k,
                n_harmonic: n_h,
                ess: rec.ess[d],
                gelman_rubin: rec.gelman_rubin[d],
                geweke: rec.geweke_z[d],
            });
        }
        let base = |kind: EstimatorKind, dim_idx: Option<usize>, ress_value: f64, ess: f64, dof: usize, gr: f64, gw: f64| {
            let e = essd(ess, ress_value, dof).ok();
            ScoreRow {
                example: example.into(),
                sampler: sampler.into(),
                checkpoint: j,
                kind,
                dim: dim_idx,
                k,
                n_harmonic: n_h,
                evaluations,
                ress: ress_value,
                eff: eff(ress_value, &prefix).unwrap_or(f64::NAN),
                ness: f64::NAN,
                essd: e.map_or(f64::NAN, |e| e.value),
                essd_flagged: e.is_some_and(|e| e.flagged),
                success: success(ress_value),
                ess,
                gelman_rubin: gr,
                geweke: gw,
                absent: false,
            }
        };
        let means: Vec<Vec<f64>> = (0..k).map(|c| (0..dim).map(|d| sums[c][d].mean(prefix[c])).collect()).collect();
        let vars: Vec<Vec<f64>> = (0..k).map(|c| (0..dim).map(|d| sums[c][d].var(prefix[c])).collect()).collect();
        for d in 0..dim {
            let (gr, gw) = (rec.gelman_rubin[d], rec.geweke_z[d]);
            let m: Vec<f64> = means.iter().map(|v| v[d]).collect();
            let v: Vec<f64> = vars.iter().map(|v| v[d]).collect();
            let r_mean = ress(&m, truth.mean[d], EstimatorKind::MeanD.r())?;
            let r_var = ress(&v, truth.var[d], EstimatorKind::VarD.r())?;
            let prefixes: Vec<&[f64]> = (0..k).map(|c| &raw_cols[c][d][..prefix[c]]).collect();
            let r_ks = ress_ks(&prefixes, &cdfs[d])?;
            let ess = ess_per_chain[d];
            rows.push(base(EstimatorKind::MeanD, Some(d), r_mean, ess, k, gr, gw));
            rows.push(base(EstimatorKind::VarD, Some(d), r_var, ess, k, gr, gw));
            rows.push(base(EstimatorKind::KsD, Some(d), r_ks, ess, k, gr, gw));
        }
        let ess_mv = dim as f64 / ess_per_chain.iter().map(|e| 1.0 / e).sum::<f64>();
        let gr = pick_worst(rec.gelman_rubin.iter().copied(), |g| (g - 1.0).abs());
        let gw = pick_worst(rec.geweke_z.iter().copied(), f64::abs);
        let r_mean = ress_multivariate(&means, &truth.mean, EstimatorKind::MeanMv.r())?;
        let r_var = ress_multivariate(&vars, &truth.var, EstimatorKind::VarMv.r())?;
        rows.push(base(EstimatorKind::MeanMv, None, r_mean, ess_mv, k * dim, gr, gw));
        rows.push(base(EstimatorKind::VarMv, None, r_var, ess_mv, k * dim, gr, gw));
    }
    Ok((rows, diag_rows))
}

/// Scores every configured pair and returns the table together with the
/// per-checkpoint diagnostics. Failed chains are left out of their pair; a
/// pair without usable chains yields rows flagged `absent`.
pub fn score_runs_with_diagnostics(artifacts: &RunArtifacts) -> Result<(ScoreTable, Vec<DiagnosticsRow>), HarnessError> {
    let config = &artifacts.config;
    let mut jobs = Vec::new();
    for d in &artifacts.densities {
        let gt = artifacts
            .ground_truth
            .get(d.name())
            .ok_or_else(|| HarnessError::MissingGroundTruth(d.name().into()))?;
        for s in &config.samplers {
            jobs.push((d, gt, s.name()));
        }
    }
    let results: Vec<Result<(Vec<ScoreRow>, Vec<DiagnosticsRow>), HarnessError>> = jobs
        .par_iter()
        .map(|(d, gt, sampler)| {
            let mut chains: Vec<&Chain> = artifacts
                .chains
                .iter()
                .filter(|c| c.header.example == d.name() && &c.header.sampler == sampler)
                .collect();
            let failed = chains.iter().filter(|c| c.failed()).count();
            if failed > 0 {
                log::warn!("{} / {sampler}: {failed} failed chain(s) excluded from scoring", d.name());
            }
            chains.retain(|c| !c.failed());
            chains.sort_by_key(|c| c.header.chain);
            let st = gt.standardizer();
            let truth = truth_of(&gt.samples, &st)?;
            score_pair(d, &st, &truth, sampler, &chains, config.checkpoints, config.k)
        })
        .collect();
    let mut table = ScoreTable::default();
    let mut diagnostics = Vec::new();
    for r in results {
        let (rows, diag) = r?;
        table.rows.extend(rows);
        diagnostics.extend(diag);
    }
    table.assign_ness();
    Ok((table, diagnostics))
}

pub fn score_runs(artifacts: &RunArtifacts) -> Result<ScoreTable, HarnessError> {
    score_runs_with_diagnostics(artifacts).map(|r| r.0)
}

/// Five-number summary with interpolated quartiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: q(0.25),
            median: median(&v).expect("nonempty"),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    /// Scored (non-absent) final-checkpoint rows.
    pub rows: usize,
    /// Mean NESS over finite values.
    pub mean_ness: Option<f64>,
    pub success_probability: Option<f64>,
    /// Distributions restricted to successful rows with finite values.
    pub ness_given_success: Option<Quartiles>,
    pub eff_given_success: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSummary {
    pub sampler: String,
    pub kinds: BTreeMap<EstimatorKind, KindSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub examples: Vec<String>,
    pub samplers: Vec<SamplerSummary>,
}

fn finite(v: impl Iterator<Item = f64>) -> Vec<f64> {
    v.filter(|x| x.is_finite()).collect()
}

/// Per-sampler summaries over the final checkpoint of every example.
pub fn summarize(table: &ScoreTable) -> Summary {
    let mut examples: Vec<String> = Vec::new();
    let mut samplers: Vec<String> = Vec::new();
    for r in &table.rows {
        if !examples.contains(&r.example) {
            examples.push(r.example.clone());
        }
        if !samplers.contains(&r.sampler) {
            samplers.push(r.sampler.clone());
        }
    }
    let mut last: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| !r.absent) {
        let e = last.entry((&r.example, &r.sampler)).or_insert(0);
        *e = (*e).max(r.checkpoint);
    }
    let final_rows: Vec<&ScoreRow> = table
        .rows
        .iter()
        .filter(|r| !r.absent && last.get(&(r.example.as_str(), r.sampler.as_str())) == Some(&r.checkpoint))
        .collect();
    let samplers = samplers
        .into_iter()
        .map(|s| {
            let kinds = EstimatorKind::ALL
                .into_iter()
                .map(|kind| {
                    let rows: Vec<&&ScoreRow> = final_rows.iter().filter(|r| r.sampler == s && r.kind == kind).collect();
                    let ness = finite(rows.iter().map(|r| r.ness));
                    let ok: Vec<&&&ScoreRow> = rows.iter().filter(|r| r.success).collect();
                    let summary = KindSummary {
                        rows: rows.len(),
                        mean_ness: (!ness.is_empty()).then(|| ness.iter().sum::<f64>() / ness.len() as f64),
                        success_probability: (!rows.is_empty()).then(|| ok.len() as f64 / rows.len() as f64),
                        ness_given_success: Quartiles::of(&finite(ok.iter().map(|r| r.ness))),
                        eff_given_success: Quartiles::of(&finite(ok.iter().map(|r| r.eff))),
                    };
                    (kind, summary)
                })
                .collect();
            SamplerSummary { sampler: s, kinds }
        })
        .collect();
    Summary { examples, samplers }
}
