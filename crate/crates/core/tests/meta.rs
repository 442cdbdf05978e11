mod common;

use common::{iid_sets, pseudo_artifacts, synthetic_meta};
use mcbench::density::bundled_by_name;
use mcbench::harness::score_runs_with_diagnostics;
use mcbench::meta::{
    build_meta_dataset, evaluate_models, features, gp_fit, initial_log_marginal_likelihood, log_marginal_likelihood,
    log_marginal_likelihood_grad, meta_analyze, paired_t_test, split_by_example, FeatureScaler, GpConfig, GpHyper,
    GpModel, MetaConfig, MetaError, LOG_FLOOR,
};
use mcbench::metrics::EstimatorKind;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn fast() -> GpConfig {
    GpConfig {
        restarts: 2,
        max_iters: 80,
        ..GpConfig::default()
    }
}

#[test]
fn feature_transforms() {
    let f = features(100.0, 1.0, 0.0, 3);
    assert!((f[0] - 4.605170185988091).abs() < 1e-12);
    assert_eq!(f[1], LOG_FLOOR.ln());
    assert_eq!(f[2], LOG_FLOOR.ln());
    assert_eq!(f[3], 3.0);
    let g = features(1.0, 0.9, -2.0, 1);
    assert!((g[1] - 0.1f64.ln()).abs() < 1e-12);
    assert!((g[2] - 2.0f64.ln()).abs() < 1e-12);
}

#[test]
fn dataset_has_one_row_per_pair() {
    let densities: Vec<_> = ["gauss-1d", "corr-2d", "mog2-2d"].iter().map(|s| bundled_by_name(s).unwrap()).collect();
    let art = pseudo_artifacts(&densities, &["a", "b"], |d, s| iid_sets(d, 4, 400, s as u64), 3, 5000, 0);
    let (table, diag) = score_runs_with_diagnostics(&art).unwrap();
    let data = build_meta_dataset(&table, &diag);
    assert_eq!(data.len() + data.excluded_flagged + data.excluded_nonfinite, 3 * 2);
    assert_eq!(data.excluded_nonfinite, 0);
    for row in &data.rows {
        let mv = table
            .rows
            .iter()
            .find(|r| r.example == row.example && r.sampler == row.sampler && r.checkpoint == 3 && r.kind == EstimatorKind::MeanMv)
            .unwrap();
        assert_eq!(row.target, mv.essd);
        assert!((row.features[0] - mv.ess.ln()).abs() < 1e-9);
        assert!((row.features[1] - (mv.gelman_rubin - 1.0).abs().max(LOG_FLOOR).ln()).abs() < 1e-12);
        assert!((row.features[2] - mv.geweke.abs().max(LOG_FLOOR).ln()).abs() < 1e-12);
        assert_eq!(row.features[3], bundled_by_name(&row.example).unwrap().dim() as f64);
    }
}

#[test]
fn flagged_and_absent_pairs_are_excluded_and_counted() {
    let d = bundled_by_name("gauss-1d").unwrap();
    let mut art = pseudo_artifacts(&[d], &["ok", "clamped", "gone"], |d, s| iid_sets(d, 3, 300, s as u64), 2, 5000, 0);
    art.chains.retain(|c| c.header.sampler != "gone");
    let (mut table, diag) = score_runs_with_diagnostics(&art).unwrap();
    for r in table.rows.iter_mut().filter(|r| r.sampler == "clamped") {
        r.essd_flagged = true;
    }
    let data = build_meta_dataset(&table, &diag);
    assert_eq!(data.rows.iter().map(|r| r.sampler.as_str()).collect::<Vec<_>>(), vec!["ok"]);
    assert_eq!(data.excluded_flagged, 1);
    assert_eq!(data.excluded_nonfinite, 1);
}

#[test]
fn split_is_by_example_and_deterministic() {
    let data = synthetic_meta(10, 7, true, 1);
    let (train, test) = split_by_example(&data, 0.2, 5).unwrap();
    assert_eq!(test.examples().len(), 2);
    assert_eq!(train.examples().len(), 8);
    assert_eq!(train.len() + test.len(), data.len());
    assert!(test.examples().is_disjoint(&train.examples()));
    let (train2, test2) = split_by_example(&data, 0.2, 5).unwrap();
    assert_eq!((train, test), (train2, test2));
    assert!(matches!(
        split_by_example(&synthetic_meta(4, 3, true, 1), 0.2, 0),
        Err(MetaError::TooFewExamples { got: 4, .. })
    ));
}

#[test]
fn different_seeds_pick_different_test_examples() {
    let data = synthetic_meta(20, 2, true, 1);
    let picks: std::collections::BTreeSet<Vec<String>> = (0..10)
        .map(|s| {
            let (_, test) = split_by_example(&data, 0.2, s).unwrap();
            test.examples().into_iter().map(String::from).collect()
        })
        .collect();
    assert!(picks.len() > 5);
}

#[test]
fn zero_targets_predict_zero() {
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64 % 7.0]).collect();
    let y = vec![0.0; 20];
    let m = gp_fit(&x, &y, &fast()).unwrap();
    for row in [vec![3.0, 1.0], vec![50.0, -4.0]] {
        let (mean, var) = m.predict(&row);
        assert!(mean.abs() < 1e-9, "{mean}");
        assert!(var > 0.0);
    }
}

#[test]
fn noiseless_sine_is_interpolated() {
    let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 2.0 * std::f64::consts::PI / 29.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| r[0].sin()).collect();
    let m = gp_fit(&x, &y, &GpConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let a = i as f64 * 2.0 * std::f64::consts::PI / 200.0;
        worst = worst.max((m.predict(&[a]).0 - a.sin()).abs());
    }
    assert!(worst < 1e-2, "max error {worst}");
    assert!(m.log_marginal_likelihood >= initial_log_marginal_likelihood(&x, &y).unwrap());
}

#[test]
fn ascent_never_lowers_the_marginal_likelihood() {
    for seed in 0..4 {
        let data = synthetic_meta(6, 5, seed % 2 == 0, seed);
        let cols = [0, 1, 2, 3];
        let (x, y) = (data.design(&cols), data.targets());
        let m = gp_fit(&x, &y, &fast()).unwrap();
        assert!(m.log_marginal_likelihood >= initial_log_marginal_likelihood(&x, &y).unwrap() - 1e-9);
    }
}

#[test]
fn prediction_at_training_inputs_and_far_away() {
    let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).cos()).collect();
    let h = GpHyper {
        log_lengthscales: vec![0.0],
        log_signal_var: 0.0,
        log_noise_var: (1e-10f64).ln(),
    };
    let m = GpModel::with_hyper(&x, &y, h).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert!((m.predict(xi).0 - yi).abs() < 1e-4);
    }
    // clipping keeps "far" at 10 standard deviations of the inputs
    let (mean, var) = m.predict(&[1e6]);
    let prior = (1.0 + 1e-10) * m.y_scale * m.y_scale;
    assert!((var / prior - 1.0).abs() < 1e-6, "{var} vs {prior}");
    assert!((mean - m.y_mean).abs() < 1e-6);
}

/// Posterior by a dense LU solve on standardized inputs.
fn dense_posterior(x: &[Vec<f64>], y: &[f64], h: &GpHyper, at: &[f64]) -> (f64, f64) {
    let scaler = FeatureScaler::fit(x);
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
    let z = scaler.apply(at);
    let n = y.len();
    let ym = y.iter().sum::<f64>() / n as f64;
    let ys = (y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / n as f64).sqrt();
    let k = |a: &[f64], b: &[f64]| {
        let s: f64 = a
            .iter()
            .zip(b)
            .zip(&h.log_lengthscales)
            .map(|((p, q), l)| (p - q).powi(2) / (2.0 * l).exp())
            .sum();
        h.log_signal_var.exp() * (-0.5 * s).exp()
    };
    let kk = DMatrix::from_fn(n, n, |i, j| k(&xs[i], &xs[j]) + if i == j { h.log_noise_var.exp() } else { 0.0 });
    let ks = DVector::from_fn(n, |i, _| k(&xs[i], &z));
    let yv = DVector::from_iterator(n, y.iter().map(|v| (v - ym) / ys));
    let lu = kk.lu();
    let alpha = lu.solve(&yv).unwrap();
    let w = lu.solve(&ks).unwrap();
    let mean = ym + ys * ks.dot(&alpha);
    let var = (h.log_signal_var.exp() - ks.dot(&w) + h.log_noise_var.exp()) * ys * ys;
    (mean, var)
}

#[test]
fn small_gp_matches_dense_solve() {
    let x = vec![vec![0.1, 2.0], vec![0.7, -1.0], vec![1.5, 0.3], vec![-0.4, 0.9], vec![2.2, 1.1]];
    let y = vec![0.3, -1.2, 0.8, 2.0, -0.1];
    let h = GpHyper {
        log_lengthscales: vec![0.2, -0.3],
        log_signal_var: 0.4,
        log_noise_var: -2.0,
    };
    let m = GpModel::with_hyper(&x, &y, h.clone()).unwrap();
    for at in [vec![0.0, 0.0], vec![1.0, 1.0], vec![0.7, -1.0], vec![-3.0, 4.0]] {
        let (a, b) = m.predict(&at);
        let (c, d) = dense_posterior(&x, &y, &h, &at);
        assert!((a - c).abs() < 1e-8, "mean {a} vs {c}");
        assert!((b - d).abs() < 1e-8, "var {b} vs {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn marginal_likelihood_gradient_matches_finite_differences(
        ls in prop::collection::vec(-1.5f64..1.5, 2),
        signal in -1.5f64..1.5,
        noise in -4.0f64..0.0,
        seed in 0u64..100,
    ) {
        let data = synthetic_meta(4, 4, true, seed);
        let x: Vec<Vec<f64>> = data.design(&[0, 2]).iter().map(|r| FeatureScaler::fit(&data.design(&[0, 2])).apply(r)).collect();
        let y = data.targets();
        let h = GpHyper { log_lengthscales: ls, log_signal_var: signal, log_noise_var: noise };
        let (f, g) = log_marginal_likelihood_grad(&x, &y, &h).unwrap();
        prop_assert!((f - log_marginal_likelihood(&x, &y, &h).unwrap()).abs() < 1e-9 * f.abs().max(1.0));
        let base = [h.log_lengthscales[0], h.log_lengthscales[1], h.log_signal_var, h.log_noise_var];
        for (i, gi) in g.iter().enumerate() {
            let eps = 1e-5;
            let at = |delta: f64| {
                let mut v = base;
                v[i] += delta;
                let hh = GpHyper { log_lengthscales: vec![v[0], v[1]], log_signal_var: v[2], log_noise_var: v[3] };
                log_marginal_likelihood(&x, &y, &hh).unwrap()
            };
            let fd = (at(eps) - at(-eps)) / (2.0 * eps);
            prop_assert!((fd - gi).abs() <= 1e-4 * gi.abs().max(1e-2), "param {}: fd {} vs {}", i, fd, gi);
        }
    }
}

#[test]
fn paired_t_test_branches_and_reference() {
    let a = [1.0, 2.0, 3.0];
    let t = paired_t_test(&a, &a).unwrap();
    assert_eq!((t.p, t.degenerate), (1.0, false));
    let b = [2.0, 3.0, 4.0];
    let t = paired_t_test(&b, &a).unwrap();
    assert!(t.degenerate && t.p == 0.0);
    assert!(paired_t_test(&[1.0], &[2.0]).is_err());
    assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());

    // paired measurements before and after a treatment
    let before = [200.1, 190.9, 192.7, 213.0, 241.4, 196.9, 172.2, 185.5, 205.2, 193.7];
    let after = [392.9, 393.2, 345.1, 393.0, 434.0, 427.9, 422.0, 383.9, 392.3, 352.2];
    let t = paired_t_test(&after, &before).unwrap();
    let d: Vec<f64> = after.iter().zip(&before).map(|(x, y)| x - y).collect();
    let m = d.iter().sum::<f64>() / 10.0;
    let s = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 9.0).sqrt();
    let t_ref = m / (s / 10f64.sqrt());
    assert!((t.t - t_ref).abs() < 1e-12);
    let dist = StudentsT::new(0.0, 1.0, 9.0).unwrap();
    assert!((t.p - 2.0 * dist.sf(t_ref)).abs() < 1e-12);
    let small = paired_t_test(&[1.1, 2.3, 2.9, 4.4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let t_small = small.t;
    assert!((small.p - 2.0 * StudentsT::new(0.0, 1.0, 3.0).unwrap().sf(t_small.abs())).abs() < 1e-10);
}

#[test]
fn iid_baseline_has_the_closed_form_mse() {
    let data = synthetic_meta(10, 6, false, 3);
    let (train, test) = split_by_example(&data, 0.2, 1).unwrap();
    let report = evaluate_models(&train, &test, &fast()).unwrap();
    let m = train.targets().iter().sum::<f64>() / train.len() as f64;
    let expected = test.targets().iter().map(|y| (y - m).powi(2)).sum::<f64>() / test.len() as f64;
    assert!((report.result("iid").unwrap().mse - expected).abs() < 1e-12);
    for r in &report.results {
        assert_eq!(r.nlls.len(), test.len());
        assert_eq!(r.squared_errors.len(), test.len());
    }
    assert_eq!(report.results.len(), 7);
    assert_eq!(report.result("GP").unwrap().delta_nll, 0.0);
    assert_eq!(report.result("GP-ESS").unwrap().features, vec!["GR", "G", "D"]);
}

#[test]
fn linear_model_recovers_a_linear_target() {
    let mut data = synthetic_meta(10, 8, false, 2);
    for r in &mut data.rows {
        r.target = 0.5 * r.features[0] - 0.1 * r.features[3] + 1.0;
    }
    let (train, test) = split_by_example(&data, 0.2, 0).unwrap();
    let report = evaluate_models(&train, &test, &fast()).unwrap();
    assert!(report.result("Linear").unwrap().mse < 1e-15);
}

#[test]
fn signal_in_ess_is_found_and_its_ablation_hurts() {
    let data = synthetic_meta(40, 7, true, 11);
    let (train, test) = split_by_example(&data, 0.2, 2).unwrap();
    let report = evaluate_models(&train, &test, &GpConfig::default()).unwrap();
    let gp = report.result("GP").unwrap();
    let iid = report.result("iid").unwrap();
    let ablated = report.result("GP-ESS").unwrap();
    assert!(iid.nll > gp.nll && iid.p_nll.unwrap() < 0.05, "{} vs {}", iid.nll, gp.nll);
    assert!(ablated.nll > gp.nll && ablated.p_nll.unwrap() < 0.05);
    assert!(gp.mse < 0.2);
}

#[test]
fn pipeline_runs_from_scores_and_diagnostics() {
    let names = ["gauss-1d", "mog2-1d", "corr-2d", "mog2-2d", "gauss-10d"];
    let densities: Vec<_> = names.iter().map(|s| bundled_by_name(s).unwrap()).collect();
    let art = pseudo_artifacts(&densities, &["a", "b", "c"], |d, s| iid_sets(d, 4, 300, 10 * s as u64 + d.dim() as u64), 2, 5000, 0);
    let (table, diag) = score_runs_with_diagnostics(&art).unwrap();
    let config = MetaConfig {
        gp: fast(),
        ..MetaConfig::default()
    };
    let (data, report) = meta_analyze(&table, &diag, &config).unwrap();
    assert_eq!(data.len(), 15);
    assert_eq!(report.test_examples.len(), 1);
    assert_eq!(report.n_test, 3);
    assert_eq!(report.n_train, 12);
}
