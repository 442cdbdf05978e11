use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{MetaDataset, FEATURE_LABELS, N_FEATURES};
use super::gp::{gp_fit, FeatureScaler, GpConfig};
use super::MetaError;
use crate::special::student_t_two_sided;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    /// Set when the differences have zero variance but nonzero mean.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, MetaError> {
    if a.len() != b.len() {
        return Err(MetaError::Invalid(format!("paired samples of lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(MetaError::TooFewRows { got: a.len(), min: 2 });
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0, degenerate: false }
        } else {
            TTest {
                t: mean.signum() * f64::INFINITY,
                p: 0.0,
                degenerate: true,
            }
        });
    }
    let t = mean / (var / n).sqrt();
    let p = student_t_two_sided(t, n - 1.0).map_err(|e| MetaError::Invalid(e.to_string()))?;
    Ok(TTest { t, p, degenerate: false })
}

/// Gaussian negative log-likelihood of `y` under `N(mean, var)`.
pub fn gaussian_nll(y: f64, mean: f64, var: f64) -> f64 {
    0.5 * ((2.0 * PI * var).ln() + (y - mean).powi(2) / var)
}

/// A predictive model's test-set losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub method: String,
    /// Features the model used.
    pub features: Vec<String>,
    pub mse: f64,
    /// Mean Gaussian negative log-likelihood.
    pub nll: f64,
    /// `nll - nll(GP)`.
    pub delta_nll: f64,
    /// Paired t-test of per-row NLL against the full GP (absent for the GP).
    pub p_nll: Option<f64>,
    /// Paired t-test of per-row squared error against the full GP.
    pub p_mse: Option<f64>,
    pub squared_errors: Vec<f64>,
    pub nlls: Vec<f64>,
}

/// Results of every model on one train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReport {
    pub n_train: usize,
    pub n_test: usize,
    pub train_examples: Vec<String>,
    pub test_examples: Vec<String>,
    pub results: Vec<ModelResult>,
}

impl MetaReport {
    pub fn result(&self, method: &str) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

struct Predictions {
    method: String,
    features: Vec<usize>,
    pred: Vec<(f64, f64)>,
}

fn ols(train: &MetaDataset, test: &MetaDataset) -> Result<Vec<(f64, f64)>, MetaError> {
    let cols: Vec<usize> = (0..N_FEATURES).collect();
    let xtr = train.design(&cols);
    let scaler = FeatureScaler::fit(&xtr);
    let n = xtr.len();
    let p = N_FEATURES + 1;
    let design = |rows: &[Vec<f64>]| {
        DMatrix::from_fn(rows.len(), p, |i, j| if j == 0 { 1.0 } else { scaler.apply(&rows[i])[j - 1] })
    };
    let a = design(&xtr);
    let y = DVector::from_vec(train.targets());
    let beta = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| MetaError::Invalid(format!("least squares: {e}")))?;
    let resid = &y - &a * &beta;
    let var = (resid.norm_squared() / n as f64).max(f64::MIN_POSITIVE);
    let b = design(&test.design(&cols));
    Ok((&b * &beta).iter().map(|m| (*m, var)).collect())
}

fn iid(train: &MetaDataset, test: &MetaDataset) -> Vec<(f64, f64)> {
    let y = train.targets();
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let v = (y.iter().map(|t| (t - m).powi(2)).sum::<f64>() / n).max(f64::MIN_POSITIVE);
    vec![(m, v); test.len()]
}

/// Method names in report order.
pub fn method_names() -> Vec<String> {
    let mut names = vec!["GP".to_string()];
    names.extend(FEATURE_LABELS.iter().map(|l| format!("GP-{l}")));
    names.push("Linear".into());
    names.push("iid".into());
    names
}

/// Fits the full GP, each single-feature ablation, linear regression and
/// the iid normal on `train`, and scores them on `test`.
pub fn evaluate_models(train: &MetaDataset, test: &MetaDataset, config: &GpConfig) -> Result<MetaReport, MetaError> {
    if test.len() < 2 {
        return Err(MetaError::TooFewRows { got: test.len(), min: 2 });
    }
    let train_ex = train.examples();
    if let Some(e) = test.examples().into_iter().find(|e| train_ex.contains(e)) {
        return Err(MetaError::Invalid(format!("example {e:?} appears in both train and test sets")));
    }
    let y_test = test.targets();
    let y_train = train.targets();
    let all: Vec<usize> = (0..N_FEATURES).collect();
    let mut gp_sets = vec![("GP".to_string(), all.clone())];
    for (drop, label) in FEATURE_LABELS.iter().enumerate() {
        gp_sets.push((format!("GP-{label}"), all.iter().copied().filter(|&c| c != drop).collect()));
    }
    let mut preds: Vec<Predictions> = gp_sets
        .into_par_iter()
        .map(|(method, cols)| {
            let model = gp_fit(&train.design(&cols), &y_train, config)?;
            Ok(Predictions {
                method,
                pred: model.predict_many(&test.design(&cols)),
                features: cols,
            })
        })
        .collect::<Result<_, MetaError>>()?;
    preds.push(Predictions {
        method: "Linear".into(),
        features: all.clone(),
        pred: ols(train, test)?,
    });
    preds.push(Predictions {
        method: "iid".into(),
        features: Vec::new(),
        pred: iid(train, test),
    });

    let losses = |p: &Predictions| -> (Vec<f64>, Vec<f64>) {
        p.pred
            .iter()
            .zip(&y_test)
            .map(|(&(m, v), &y)| ((y - m).powi(2), gaussian_nll(y, m, v)))
            .unzip()
    };
    let (gp_se, gp_nll) = losses(&preds[0]);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gp_mean_nll = mean(&gp_nll);
    let mut results = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        let (se, nll) = losses(p);
        let (p_nll, p_mse) = if i == 0 {
            (None, None)
        } else {
            (Some(paired_t_test(&nll, &gp_nll)?.p), Some(paired_t_test(&se, &gp_se)?.p))
        };
        results.push(ModelResult {
            method: p.method.clone(),
            features: p.features.iter().map(|&c| FEATURE_LABELS[c].to_string()).collect(),
            mse: mean(&se),
            nll: mean(&nll),
            delta_nll: mean(&nll) - gp_mean_nll,
            p_nll,
            p_mse,
            squared_errors: se,
            nlls: nll,
        });
    }
    Ok(MetaReport {
        n_train: train.len(),
        n_test: test.len(),
        train_examples: train.examples().into_iter().map(String::from).collect(),
        test_examples: test.examples().into_iter().map(String::from).collect(),
        results,
    })
}
