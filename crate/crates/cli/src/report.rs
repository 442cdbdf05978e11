//! Report emission: a per-sampler text table and flat delimited files for
//! external plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mcbench::harness::{KindSummary, Summary};
use mcbench::metrics::{EstimatorKind, ScoreRow, ScoreTable};
use mcbench::special::chi2_quantile;

pub const REPORT_FILE: &str = "report.txt";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const CALIBRATION_CSV: &str = "calibration.csv";

/// Estimators shown in the text table, in column order.
pub const TABLE_KINDS: [EstimatorKind; 3] = [EstimatorKind::KsD, EstimatorKind::MeanD, EstimatorKind::VarD];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    TableText,
    Delimited,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4}"),
        _ => "-".into(),
    }
}

fn kind_label(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::KsD => "KS",
        EstimatorKind::MeanD => "mean",
        EstimatorKind::VarD => "var",
        EstimatorKind::MeanMv => "mean_mv",
        EstimatorKind::VarMv => "var_mv",
    }
}

/// One line per sampler: mean NESS then success probability, each for the
/// KS, mean and variance estimators.
pub fn render_table(summary: &Summary) -> String {
    let mut header = vec!["sampler".to_string()];
    for prefix in ["NESS", "P(success)"] {
        header.extend(TABLE_KINDS.iter().map(|k| format!("{prefix} {}", kind_label(*k))));
    }
    let mut lines = vec![header];
    for s in &summary.samplers {
        let get = |k: EstimatorKind| s.kinds.get(&k);
        let mut line = vec![s.sampler.clone()];
        line.extend(TABLE_KINDS.iter().map(|&k| cell(get(k).and_then(|x| x.mean_ness))));
        line.extend(TABLE_KINDS.iter().map(|&k| cell(get(k).and_then(|x| x.success_probability))));
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Degrees of freedom of a row's squared-error sum under iid sampling.
pub fn calibration_dof(row: &ScoreRow, dim: usize) -> usize {
    if row.kind.is_multivariate() {
        row.k * dim
    } else {
        row.k
    }
}

/// Central 95% interval for the RESS of an iid sampler whose per-chain
/// ESS is `ess`: `[ess * dof / q(0.975), ess * dof / q(0.025)]`.
pub fn calibration_band(ess: f64, dof: usize) -> (f64, f64) {
    let d = dof as f64;
    let hi_q = chi2_quantile(0.975, d).expect("valid dof");
    let lo_q = chi2_quantile(0.025, d).expect("valid dof");
    (ess * d / hi_q, ess * d / lo_q)
}

fn write_summary_csv(path: &Path, summary: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record([
        "sampler",
        "kind",
        "rows",
        "mean_ness",
        "success_probability",
        "ness_median_given_success",
        "eff_median_given_success",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &summary.samplers {
        for (kind, k) in &s.kinds {
            let KindSummary {
                rows,
                mean_ness,
                success_probability,
                ness_given_success,
                eff_given_success,
            } = k;
            w.write_record([
                s.sampler.clone(),
                kind.as_str().to_string(),
                rows.to_string(),
                opt(*mean_ness),
                opt(*success_probability),
                opt(ness_given_success.as_ref().map(|q| q.median)),
                opt(eff_given_success.as_ref().map(|q| q.median)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_calibration_csv(path: &Path, table: &ScoreTable) -> Result<()> {
    let mut dims = std::collections::BTreeMap::new();
    for r in &table.rows {
        if let Some(d) = r.dim {
            let e = dims.entry(r.example.as_str()).or_insert(0usize);
            *e = (*e).max(d + 1);
        }
    }
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record([
        "example", "sampler", "checkpoint", "kind", "dim", "ess", "ress", "dof", "band_lo", "band_hi", "inside",
    ])?;
    for r in table.rows.iter().filter(|r| !r.absent && r.ess.is_finite() && r.ess > 0.0) {
        let dof = calibration_dof(r, dims.get(r.example.as_str()).copied().unwrap_or(1));
        let (lo, hi) = calibration_band(r.ess, dof);
        w.write_record([
            r.example.clone(),
            r.sampler.clone(),
            r.checkpoint.to_string(),
            r.kind.as_str().to_string(),
            r.dim.map(|d| d.to_string()).unwrap_or_default(),
            r.ess.to_string(),
            r.ress.to_string(),
            dof.to_string(),
            lo.to_string(),
            hi.to_string(),
            (r.ress >= lo && r.ress <= hi).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the report into `dir` and returns the files written. The text
/// format writes the sampler table; the delimited format writes the score
/// table, per-sampler summary and calibration pairs.
pub fn emit_report(summary: &Summary, table: &ScoreTable, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    match format {
        Format::TableText => {
            let path = dir.join(REPORT_FILE);
            std::fs::write(&path, render_table(summary)).with_context(|| path.display().to_string())?;
            Ok(vec![path])
        }
        Format::Delimited => {
            let scores = dir.join(mcbench::harness::SCORES_FILE);
            table.save(&scores)?;
            let sum = dir.join(SUMMARY_CSV);
            write_summary_csv(&sum, summary)?;
            let cal = dir.join(CALIBRATION_CSV);
            write_calibration_csv(&cal, table)?;
            Ok(vec![scores, sum, cal])
        }
    }
}
