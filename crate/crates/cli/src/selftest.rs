//! Built-in numerical oracles: the Kolmogorov constant, chi-square values
//! and the ESS of AR(1) chains.

use mcbench::diagnostics::ess;
use mcbench::rng;
use mcbench::special::{chi2_cdf, chi2_quantile, kolmogorov_mean_square, KOLMOGOROV_R};
use rand_distr::{Distribution, StandardNormal};

pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, value: f64, expected: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        passed: (value - expected).abs() <= tol,
        detail: format!("got {value:.12}, expected {expected:.12} +- {tol:e}"),
    }
}

/// Simulated AR(1) series with unit innovations.
pub fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &["ar1".into(), ((rho * 1000.0) as u64).into()]);
    let mut x = Distribution::<f64>::sample(&StandardNormal, &mut r) / (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            x = rho * x + Distribution::<f64>::sample(&StandardNormal, &mut r);
            x
        })
        .collect()
}

pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut out = vec![
        check("kolmogorov constant (integrated)", kolmogorov_mean_square(4000), 0.822, 1e-3),
        check("kolmogorov constant (stored)", KOLMOGOROV_R, 0.822, 1e-3),
        check("chi2 cdf(8; 8)", chi2_cdf(8.0, 8.0).unwrap_or(f64::NAN), 0.566529879633291, 1e-12),
        check(
            "chi2 quantile(0.025; 8)",
            chi2_quantile(0.025, 8.0).unwrap_or(f64::NAN),
            2.1797307472526497,
            1e-9,
        ),
        check(
            "chi2 quantile(0.975; 8)",
            chi2_quantile(0.975, 8.0).unwrap_or(f64::NAN),
            17.534546139484647,
            1e-9,
        ),
    ];
    let n = 100_000;
    for rho in [0.3, 0.5, 0.9] {
        let expected = n as f64 * (1.0 - rho) / (1.0 + rho);
        let got = ess(&ar1(rho, n, seed)).map(|e| e.value).unwrap_or(f64::NAN);
        out.push(Check {
            name: format!("AR(1) ESS, rho = {rho}"),
            passed: ((got - expected) / expected).abs() <= 0.1,
            detail: format!("got {got:.1}, expected {expected:.1} within 10%"),
        });
    }
    out
}
