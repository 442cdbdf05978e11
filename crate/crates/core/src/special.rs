//! Special functions used by the scoring code: log-gamma, regularized
//! incomplete gamma and beta, the normal CDF and quantile, and the
//! chi-square / Student-t distribution functions built on them.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

/// `R` constant of the squared Kolmogorov-Smirnov estimator: the mean of the
/// squared limiting Kolmogorov variable, `pi^2 / 12`.
pub const KOLMOGOROV_R: f64 = PI * PI / 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("argument {name} = {value} outside its domain ({expected})")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
}

fn domain(name: &'static str, value: f64, expected: &'static str) -> DomainError {
    DomainError::OutOfDomain {
        name,
        value,
        expected,
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma `P(a, x)`. Unchecked: `a > 0`, `x >= 0`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, computed
/// without cancellation in the upper tail.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn check_chi2(x: f64, dof: f64) -> Result<(), DomainError> {
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(domain("dof", dof, "positive and finite"));
    }
    if !(x >= 0.0) {
        return Err(domain("x", x, "x >= 0"));
    }
    Ok(())
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: f64) -> Result<f64, DomainError> {
    check_chi2(x, dof)?;
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_p(0.5 * dof, 0.5 * x))
}

/// Survival function `1 - CDF` of the chi-square distribution.
pub fn chi2_sf(x: f64, dof: f64) -> Result<f64, DomainError> {
    check_chi2(x, dof)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_q(0.5 * dof, 0.5 * x))
}

/// Chi-square quantile by safeguarded Newton iteration on the CDF.
pub fn chi2_quantile(p: f64, dof: f64) -> Result<f64, DomainError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p, "0 <= p <= 1"));
    }
    check_chi2(0.0, dof)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.0_f64, dof.max(1.0));
    while gamma_p(0.5 * dof, 0.5 * hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let log_norm = ln_gamma(0.5 * dof) + 0.5 * dof * 2f64.ln();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = gamma_p(0.5 * dof, 0.5 * x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let pdf = ((0.5 * dof - 1.0) * x.ln() - 0.5 * x - log_norm).exp();
        let mut next = x - f / pdf;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile `Phi^-1(p)`.
///
/// Acklam's rational approximation followed by one Halley step against the
/// `erfc`-based CDF, which brings the absolute error to ~1e-15.
pub fn normal_inv_cdf(p: f64) -> Result<f64, DomainError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p, "0 <= p <= 1"));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement; the residual is taken on whichever tail is smaller.
    let e = if p < 0.5 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    // exp overflows for subnormal tails; the unrefined value is kept there
    if !u.is_finite() {
        return Ok(x);
    }
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Quantile of the standard normal given the *upper* tail probability
/// `q = 1 - p`; accurate when `p` itself would round to 1.
pub fn normal_inv_sf(q: f64) -> Result<f64, DomainError> {
    normal_inv_cdf(q).map(|z| -z)
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`. Unchecked: `a, b > 0`, `0 <= x <= 1`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `dof`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> Result<f64, DomainError> {
    if !(dof > 0.0) {
        return Err(domain("dof", dof, "dof > 0"));
    }
    if t.is_nan() {
        return Err(domain("t", t, "not NaN"));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_inc(0.5 * dof, 0.5, dof / (dof + t * t)))
}

/// CDF of the limiting Kolmogorov distribution, `P(sup |B(t)| <= x)` for a
/// Brownian bridge. Uses the theta-function form below 1 and the
/// alternating series above.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    if x < 1.0 {
        let c = -PI * PI / (8.0 * x * x);
        let s: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum();
        (2.0 * PI).sqrt() / x * s
    } else {
        1.0 - kolmogorov_sf(x)
    }
}

/// Upper tail of the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if x < 1.0 {
        return 1.0 - kolmogorov_cdf(x);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Approximate p-value of a one-sample KS statistic `d` from `n` points,
/// using the limiting distribution with Stephens' finite-n correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// `E[X^2]` for the limiting Kolmogorov variable, by Simpson integration of
/// `2 x P(X > x)` over `[0, 8]`. An independent check on [`KOLMOGOROV_R`].
pub fn kolmogorov_mean_square(intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = 8.0 / n as f64;
    let f = |x: f64| 2.0 * x * kolmogorov_sf(x);
    let inner: f64 = (1..n).map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(0.0) + inner + f(8.0)) * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for n in 1..20 {
            assert_abs_diff_eq!(ln_gamma(n as f64), fact.ln(), epsilon = 1e-12);
            fact *= n as f64;
        }
        assert_abs_diff_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-13);
    }

    #[test]
    fn normal_quantile_is_finite_in_subnormal_tails() {
        let mut prev = normal_inv_cdf(1e-300).unwrap();
        for p in [1e-310, 1.14859e-318, 1e-320, 5e-324] {
            let z = normal_inv_cdf(p).unwrap();
            assert!(z.is_finite() && z < prev, "{p:e}: {z}");
            prev = z;
            assert_eq!(normal_inv_sf(p).unwrap(), -z);
        }
    }

    #[test]
    fn chi2_two_dof_closed_form() {
        for &x in &[0.0f64, 0.01, 0.5, 1.0, 3.7, 10.0, 40.0] {
            let want = 1.0 - (-x / 2.0).exp();
            assert_abs_diff_eq!(chi2_cdf(x, 2.0).unwrap(), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn chi2_eight_dof_at_eight() {
        // even dof: P(4, 4) = 1 - e^-4 (1 + 4 + 8 + 32/3)
        let want = 1.0 - (-4.0f64).exp() * (71.0 / 3.0);
        assert_abs_diff_eq!(chi2_cdf(8.0, 8.0).unwrap(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(want, 0.56653, epsilon = 1e-5);
    }

    #[test]
    fn chi2_domain_errors() {
        assert!(chi2_cdf(-1.0, 3.0).is_err());
        assert!(chi2_cdf(1.0, 0.0).is_err());
        assert!(chi2_cdf(f64::NAN, 3.0).is_err());
        assert_eq!(chi2_cdf(f64::INFINITY, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn chi2_tails_are_complementary() {
        for &k in &[1.0, 3.0, 8.0, 80.0] {
            for &x in &[0.1, 2.0, 7.5, 30.0, 150.0] {
                let s = chi2_cdf(x, k).unwrap() + chi2_sf(x, k).unwrap();
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn chi2_quantile_inverts_cdf() {
        for &k in &[1.0, 2.0, 8.0, 50.0] {
            for &p in &[1e-6, 0.025, 0.5, 0.975, 0.999_999] {
                let x = chi2_quantile(p, k).unwrap();
                assert_abs_diff_eq!(chi2_cdf(x, k).unwrap(), p, epsilon = 1e-12);
            }
        }
        // textbook table values for 8 dof
        assert_abs_diff_eq!(chi2_quantile(0.025, 8.0).unwrap(), 2.179_73, epsilon = 1e-5);
        assert_abs_diff_eq!(chi2_quantile(0.975, 8.0).unwrap(), 17.534_5, epsilon = 1e-4);
    }

    #[test]
    fn normal_quantile_known_points() {
        assert_eq!(normal_inv_cdf(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(normal_inv_cdf(0.975).unwrap(), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_inv_cdf(0.025).unwrap(), -1.959_963_984_540_054, epsilon = 1e-12);
        assert!(normal_inv_cdf(1.5).is_err());
        assert!(normal_inv_cdf(f64::NAN).is_err());
        assert_eq!(normal_inv_cdf(0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn normal_quantile_round_trips_in_tails() {
        for &z in &[-8.0, -5.0, -2.5, -0.3, 0.7, 3.0, 6.0] {
            let back = if z < 0.0 {
                normal_inv_cdf(normal_cdf(z)).unwrap()
            } else {
                normal_inv_sf(normal_cdf(-z)).unwrap()
            };
            assert_abs_diff_eq!(back, z, epsilon = 1e-9);
        }
    }

    #[test]
    fn t_two_sided_limits() {
        assert_abs_diff_eq!(student_t_two_sided(0.0, 5.0).unwrap(), 1.0, epsilon = 1e-14);
        // one dof is Cauchy: P(|T| > 1) = 0.5
        assert_abs_diff_eq!(student_t_two_sided(1.0, 1.0).unwrap(), 0.5, epsilon = 1e-13);
        // two dof closed form: P(|T|>t) = 1 - t / sqrt(2 + t^2)
        let t: f64 = 2.3;
        assert_abs_diff_eq!(
            student_t_two_sided(t, 2.0).unwrap(),
            1.0 - t / (2.0 + t * t).sqrt(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn kolmogorov_forms_agree_and_match_known_quantiles() {
        for &x in &[0.6, 0.9, 1.0, 1.2, 1.5] {
            let theta = (2.0 * PI).sqrt() / x
                * (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * PI * PI / (8.0 * x * x)).exp()).sum::<f64>();
            let alternating = 1.0
                - 2.0 * (1..=100).map(|k| (-1f64).powi(k + 1) * (-2.0 * (k * k) as f64 * x * x).exp()).sum::<f64>();
            assert_abs_diff_eq!(theta, alternating, epsilon = 1e-12);
            assert_abs_diff_eq!(kolmogorov_cdf(x) + kolmogorov_sf(x), 1.0, epsilon = 1e-15);
        }
        // classical critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert_abs_diff_eq!(kolmogorov_sf(1.358_1), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.627_6), 0.01, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_cdf(0.999_999_9), kolmogorov_cdf(1.000_000_1), epsilon = 1e-6);
    }

    #[test]
    fn kolmogorov_mean_square_matches_constant() {
        assert_abs_diff_eq!(kolmogorov_mean_square(4000), KOLMOGOROV_R, epsilon = 1e-6);
    }
}
