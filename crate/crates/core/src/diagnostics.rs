//! Chain-only convergence diagnostics: effective sample size,
//! Gelman-Rubin and Geweke. None of these look at the ground truth.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::SampleMatrix;

/// Lower clamp applied to ESS values.
pub const ESS_FLOOR: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("series of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("need at least {min} chains, got {got}")]
    TooFewChains { got: usize, min: usize },
    #[error("chains must have equal lengths ({0:?})")]
    UnequalLengths(Vec<usize>),
    #[error("Geweke fractions {a} + {b} must be positive and sum to at most 1")]
    BadFractions { a: f64, b: f64 },
}

fn require_len(series: &[f64], min: usize) -> Result<(), DiagnosticsError> {
    if series.len() < min {
        Err(DiagnosticsError::TooShort { len: series.len(), min })
    } else {
        Ok(())
    }
}

/// Biased (1/N) empirical autocovariance at lags `0..=max_lag`, via FFT.
///
/// A constant series yields all zeros; callers treat `acov[0] == 0` as the
/// degenerate flag.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Result<Vec<f64>, DiagnosticsError> {
    require_len(series, 4)?;
    let n = series.len();
    let max_lag = max_lag.min(n - 1);
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let norm = (len * n) as f64;
    Ok(buf[..=max_lag].iter().map(|c| c.re / norm).collect())
}

/// Integrated autocorrelation time `1 + 2 sum rho_k`, truncated by Geyer's
/// initial monotone positive sequence over paired lags.
fn geyer_tau(acov: &[f64]) -> f64 {
    let g0 = acov[0];
    let rho = |k: usize| acov[k] / g0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < acov.len() {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if !(pair > 0.0) {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    -1.0 + 2.0 * sum
}

/// An ESS value after clamping to `(ESS_FLOOR, N)`, with the raw estimate
/// kept for logging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// Effective sample size `N / tau` with Geyer truncation.
pub fn ess(series: &[f64]) -> Result<EssEstimate, DiagnosticsError> {
    require_len(series, 8)?;
    let n = series.len() as f64;
    let acov = autocovariance(series, series.len() - 1)?;
    if !(acov[0] > 0.0) {
        log::debug!("constant series of length {}: ESS clamped", series.len());
        return Ok(EssEstimate {
            value: ESS_FLOOR,
            raw: 0.0,
            clamped: true,
        });
    }
    let raw = n / geyer_tau(&acov);
    let value = raw.clamp(ESS_FLOOR, n);
    Ok(EssEstimate {
        value,
        raw,
        clamped: value != raw,
    })
}

/// Sum of per-chain ESS values.
pub fn ess_multichain<S: AsRef<[f64]>>(chains: &[S]) -> Result<EssEstimate, DiagnosticsError> {
    if chains.is_empty() {
        return Err(DiagnosticsError::TooFewChains { got: 0, min: 1 });
    }
    let mut total = EssEstimate {
        value: 0.0,
        raw: 0.0,
        clamped: false,
    };
    for c in chains {
        let e = ess(c.as_ref())?;
        total.value += e.value;
        total.raw += e.raw;
        total.clamped |= e.clamped;
    }
    Ok(total)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Potential scale reduction over `K >= 2` equal-length chains, without
/// chain splitting. `+inf` when chains are internally constant but differ.
pub fn gelman_rubin<S: AsRef<[f64]>>(chains: &[S]) -> Result<f64, DiagnosticsError> {
    if chains.len() < 2 {
        return Err(DiagnosticsError::TooFewChains { got: chains.len(), min: 2 });
    }
    let lens: Vec<usize> = chains.iter().map(|c| c.as_ref().len()).collect();
    if lens.iter().any(|&l| l != lens[0]) {
        return Err(DiagnosticsError::UnequalLengths(lens));
    }
    let n = lens[0];
    if n < 4 {
        return Err(DiagnosticsError::TooShort { len: n, min: 4 });
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c.as_ref())).collect();
    let k = stats.len() as f64;
    let w = stats.iter().map(|s| s.1).sum::<f64>() / k;
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let b = n as f64 * mean_var(&means).1;
    if w == 0.0 {
        return Ok(if b > 0.0 { f64::INFINITY } else { 1.0 });
    }
    let n = n as f64;
    Ok((((n - 1.0) / n * w + b / n) / w).sqrt())
}

/// Variance of a segment mean: spectral density at zero over the length.
fn mean_variance(segment: &[f64]) -> Result<f64, DiagnosticsError> {
    let acov = autocovariance(segment, segment.len() - 1)?;
    if !(acov[0] > 0.0) {
        return Ok(0.0);
    }
    Ok(acov[0] * geyer_tau(&acov).max(0.0) / segment.len() as f64)
}

/// Geweke z-score comparing the mean of the first `frac_a` of the series
/// with the mean of the last `frac_b`. NaN when both segment variances vanish.
pub fn geweke(series: &[f64], frac_a: f64, frac_b: f64) -> Result<f64, DiagnosticsError> {
    require_len(series, 100)?;
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(DiagnosticsError::BadFractions { a: frac_a, b: frac_b });
    }
    let n = series.len();
    let na = ((frac_a * n as f64).floor() as usize).max(4);
    let nb = ((frac_b * n as f64).floor() as usize).max(4);
    let a = &series[..na];
    let b = &series[n - nb..];
    let ma = a.iter().sum::<f64>() / na as f64;
    let mb = b.iter().sum::<f64>() / nb as f64;
    let s2 = mean_variance(a)? + mean_variance(b)?;
    if !(s2 > 0.0) {
        return Ok(f64::NAN);
    }
    Ok((ma - mb) / s2.sqrt())
}

/// Diagnostics for a set of chains, per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    /// Multi-chain ESS (sum over chains).
    pub ess: Vec<f64>,
    pub gelman_rubin: Vec<f64>,
    /// Largest-magnitude per-chain Geweke z.
    pub geweke_z: Vec<f64>,
    pub n_per_chain: Vec<usize>,
    pub k: usize,
}

impl DiagnosticsRecord {
    /// Evaluates all diagnostics on the first `prefix[k]` rows of each chain.
    ///
    /// Gelman-Rubin uses the common prefix (shortest chain); it is NaN when
    /// fewer than two chains qualify. Geweke is NaN for chains shorter than
    /// 100 rows; ESS is floored for chains shorter than 8 rows.
    pub fn compute(chains: &[&SampleMatrix], prefix: &[usize]) -> Self {
        Self::compute_strided(chains, prefix, 1)
    }

    /// As [`compute`](Self::compute) for chains whose rows interleave
    /// `stride` walkers. A chain's ESS is the sum over its walker series;
    /// Gelman-Rubin and Geweke use the interleaved sequence.
    pub fn compute_strided(chains: &[&SampleMatrix], prefix: &[usize], stride: usize) -> Self {
        assert_eq!(chains.len(), prefix.len());
        let stride = stride.max(1);
        let dim = chains.first().map(|c| c.dim()).unwrap_or(0);
        let k = chains.len();
        let common = prefix.iter().copied().min().unwrap_or(0);
        let mut rec = DiagnosticsRecord {
            ess: Vec::with_capacity(dim),
            gelman_rubin: Vec::with_capacity(dim),
            geweke_z: Vec::with_capacity(dim),
            n_per_chain: prefix.to_vec(),
            k,
        };
        for d in 0..dim {
            let cols: Vec<Vec<f64>> = chains.iter().zip(prefix).map(|(c, &n)| c.column_prefix(d, n)).collect();
            let chain_ess = |c: &Vec<f64>| -> f64 {
                if stride == 1 {
                    return ess(c).map(|e| e.value).unwrap_or(ESS_FLOOR);
                }
                (0..stride)
                    .map(|w| {
                        let walker: Vec<f64> = c.iter().skip(w).step_by(stride).copied().collect();
                        ess(&walker).map(|e| e.value).unwrap_or(ESS_FLOOR)
                    })
                    .sum()
            };
            let e: f64 = cols.iter().map(chain_ess).sum();
            rec.ess.push(e);
            let trimmed: Vec<&[f64]> = cols.iter().map(|c| &c[..common]).collect();
            rec.gelman_rubin.push(gelman_rubin(&trimmed).unwrap_or(f64::NAN));
            let z = cols
                .iter()
                .filter_map(|c| geweke(c, 0.1, 0.5).ok())
                .filter(|z| !z.is_nan())
                .fold(f64::NAN, |acc: f64, z| if acc.is_nan() || z.abs() > acc.abs() { z } else { acc });
            rec.geweke_z.push(z);
        }
        rec
    }
}
