mod common;

use std::f64::consts::PI;

use common::{ks_stationarity, mean, run, run_on, spec, view_of, Affine, Offset};
use mcbench::density::{bundled_by_name, AffineTransform, BenchmarkDensity, LogDensity, MixtureOfGaussians};
use mcbench::diagnostics::ess;
use mcbench::rng;
use mcbench::samplers::{
    accept_probability, init_chain, leapfrog, Emcee, InitMode, Kernel, Nuts, Position, ProposalFamily, Rwm, Sampler,
    SamplerKind, SamplerSpec, Slice,
};
use mcbench::SampleMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

fn gauss1() -> BenchmarkDensity {
    bundled_by_name("gauss-1d").unwrap()
}

fn frozen(kind: SamplerKind) -> SamplerSpec {
    let mut s = spec(kind);
    s.adapt = Some(false);
    s
}

#[test]
fn rwm_zero_scale_chain_is_constant() {
    let d = gauss1();
    let view = view_of(&d);
    let mut k = Rwm::new(ProposalFamily::Gauss, vec![0.0], 0.234, true);
    let mut pos = Position::evaluate(&view, vec![0.3], false).unwrap();
    let mut r = rng::from_seed(1);
    for _ in 0..500 {
        let s = k.transition(&mut pos, &view, &mut r).unwrap();
        assert!(s.accepted);
        assert_eq!(pos.x, vec![0.3]);
    }
}

/// Expected acceptance of a Gaussian random walk with scale `s` on N(0, 1),
/// by 2-D midpoint quadrature of `pi(x) q(z) min(1, pi(x + z) / pi(x))`.
fn expected_acceptance(s: f64) -> f64 {
    let (n, lim) = (1200, 9.0);
    let h = 2.0 * lim / n as f64;
    let phi = |v: f64| (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let x = -lim + (i as f64 + 0.5) * h;
        for j in 0..n {
            let z = -lim + (j as f64 + 0.5) * h;
            let y = x + s * z;
            total += phi(x) * phi(z) * (phi(y) / phi(x)).min(1.0);
        }
    }
    total * h * h
}

#[test]
fn rwm_acceptance_matches_quadrature() {
    let oracle = expected_acceptance(2.4);
    assert!(oracle > 0.35 && oracle < 0.55, "{oracle}");
    let d = gauss1();
    let view = view_of(&d);
    let mut k = Rwm::new(ProposalFamily::Gauss, vec![2.4], 0.234, false);
    let mut pos = Position::evaluate(&view, vec![0.0], false).unwrap();
    let mut r = rng::from_seed(2);
    let n = 100_000;
    let acc = (0..n).filter(|_| k.transition(&mut pos, &view, &mut r).unwrap().accepted).count() as f64 / n as f64;
    assert!((acc - oracle).abs() < 0.01, "{acc} vs {oracle}");
}

fn kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64;
    x.iter().map(|a| (a - m).powi(4)).sum::<f64>() / x.len() as f64 / (v * v)
}

#[test]
fn cauchy_increments_have_diverging_kurtosis() {
    let mut r = rng::from_seed(3);
    let small: Vec<f64> = (0..1_000).map(|_| ProposalFamily::Cauchy.draw(&mut r)).collect();
    let large: Vec<f64> = (0..200_000).map(|_| ProposalFamily::Cauchy.draw(&mut r)).collect();
    let gauss: Vec<f64> = (0..200_000).map(|_| ProposalFamily::Gauss.draw(&mut r)).collect();
    assert!(kurtosis(&large) > 10.0 * kurtosis(&small).max(3.0));
    assert!((kurtosis(&gauss) - 3.0).abs() < 0.1);
}

#[test]
fn laplace_increments_have_unit_scale() {
    let mut r = rng::from_seed(4);
    let x: Vec<f64> = (0..200_000).map(|_| ProposalFamily::Laplace.draw(&mut r)).collect();
    // Laplace(0, 1): E|x| = 1, variance 2, kurtosis 6
    assert!((mean(&x.iter().map(|v| v.abs()).collect::<Vec<_>>()) - 1.0).abs() < 0.02);
    assert!((kurtosis(&x) - 6.0).abs() < 0.5);
}

#[test]
fn rwm_adaptation_sign_and_fixed_point() {
    let mut k = Rwm::new(ProposalFamily::Gauss, vec![1.0, 2.0], 0.234, true);
    k.adapt(0.234);
    assert_eq!(k.scale(), &[1.0, 2.0]);
    k.adapt(1.0);
    assert!(k.scale()[0] > 1.0 && k.scale()[1] > 2.0);
    let grown = k.scale()[0];
    k.adapt(0.0);
    assert!(k.scale()[0] < grown);
}

#[test]
fn rwm_adapted_acceptance_in_ten_dimensions() {
    let d = bundled_by_name("gauss-10d").unwrap();
    let mut s = spec(SamplerKind::RwmGauss);
    s.proposal_scale = Some(0.05);
    let out = run(&d, &s, 5_000, 0, 5);
    let view = view_of(&d);
    let Sampler::Single { mut kernel, mut pos } = out.sampler else { panic!("single chain") };
    let mut r = rng::from_seed(6);
    let n = 5_000;
    let acc: f64 = (0..n).map(|_| kernel.transition(&mut pos, &view, &mut r).unwrap().accept_stat).sum::<f64>() / n as f64;
    assert!(acc > 0.1 && acc < 0.5, "{acc}");
}

#[test]
fn rwm_detailed_balance_on_grid() {
    let d = gauss1();
    let view = view_of(&d);
    for family in [ProposalFamily::Gauss, ProposalFamily::Cauchy, ProposalFamily::Laplace] {
        let k = Rwm::new(family, vec![1.3], 0.234, false);
        let grid: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let lp: Vec<f64> = grid.iter().map(|x| view.log_density(&[*x]).unwrap()).collect();
        let t = |i: usize, j: usize| (k.log_proposal_density(&[grid[j] - grid[i]])).exp() * accept_probability(lp[j] - lp[i]);
        for i in 0..41 {
            for j in 0..41 {
                let a = lp[i].exp() * t(i, j);
                let b = lp[j].exp() * t(j, i);
                assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "{family:?} {i} {j}: {a} {b}");
            }
        }
    }
}

#[test]
fn rwm_rejection_rate_matches_integrated_kernel() {
    let d = gauss1();
    let view = view_of(&d);
    let x0 = 1.5;
    let mut k = Rwm::new(ProposalFamily::Gauss, vec![1.3], 0.234, false);
    // Simpson integration of q(y - x0) alpha(x0, y) over y
    let n = 4000;
    let (lo, hi) = (x0 - 12.0 * 1.3, x0 + 12.0 * 1.3);
    let h = (hi - lo) / n as f64;
    let lp0 = view.log_density(&[x0]).unwrap();
    let f = |y: f64| k.log_proposal_density(&[y - x0]).exp() * accept_probability(view.log_density(&[y]).unwrap() - lp0);
    let inner: f64 = (1..n).map(|i| f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    let move_prob = (f(lo) + inner + f(hi)) * h / 3.0;
    let mut r = rng::from_seed(7);
    let trials = 100_000;
    let mut moves = 0;
    for _ in 0..trials {
        let mut pos = Position::evaluate(&view, vec![x0], false).unwrap();
        if k.transition(&mut pos, &view, &mut r).unwrap().accepted {
            moves += 1;
        }
    }
    let sigma = (trials as f64 * move_prob * (1.0 - move_prob)).sqrt();
    assert!((moves as f64 - trials as f64 * move_prob).abs() < 4.0 * sigma);
}

fn oscillator_energy_error(eps: f64, length: f64) -> f64 {
    let d = gauss1();
    let view = view_of(&d);
    let (mut x, mut p) = (vec![1.0], vec![0.5]);
    let (mut lp, mut g) = view.grad_log_density(&x).unwrap();
    let h0 = -lp + 0.5 * p[0] * p[0];
    let steps = (length / eps).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let out = leapfrog(&view, &x, &p, lp, &g, eps, 1, &[1.0]).unwrap();
        x = out.x;
        p = out.p;
        lp = out.logp;
        g = out.grad;
        worst = worst.max((-lp + 0.5 * p[0] * p[0] - h0).abs());
    }
    worst
}

#[test]
fn leapfrog_zero_steps_and_reversibility() {
    let d = bundled_by_name("mog2-2d").unwrap();
    let view = view_of(&d);
    let x = vec![0.4, -0.7];
    let (lp, g) = view.grad_log_density(&x).unwrap();
    let same = leapfrog(&view, &x, &[0.3, 0.1], lp, &g, 0.1, 0, &[1.0, 1.0]).unwrap();
    assert_eq!((same.x.clone(), same.p.clone()), (x.clone(), vec![0.3, 0.1]));
    let fwd = leapfrog(&view, &x, &[0.3, 0.1], lp, &g, 0.05, 25, &[1.5, 0.7]).unwrap();
    let neg: Vec<f64> = fwd.p.iter().map(|v| -v).collect();
    let back = leapfrog(&view, &fwd.x, &neg, fwd.logp, &fwd.grad, 0.05, 25, &[1.5, 0.7]).unwrap();
    for (a, b) in back.x.iter().zip(&x) {
        assert!((a - b).abs() < 1e-10);
    }
    for (a, b) in back.p.iter().zip(&[0.3, 0.1]) {
        assert!((-a - b).abs() < 1e-10);
    }
}

#[test]
fn leapfrog_energy_error_is_second_order() {
    let coarse = oscillator_energy_error(0.1, 10.0);
    let fine = oscillator_energy_error(0.05, 10.0);
    let ratio = coarse / fine;
    assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
}

#[test]
fn hmc_tiny_step_always_accepts() {
    let d = bundled_by_name("corr-2d").unwrap();
    let mut s = frozen(SamplerKind::Hmc);
    s.step_size = Some(1e-5);
    s.n_steps = Some(1);
    s.step_jitter = Some(0.0);
    let view = view_of(&d);
    let out = run_on(&view, &d, &s, 0, 0, 8);
    let Sampler::Single { mut kernel, mut pos } = out.sampler else { panic!() };
    let mut r = rng::from_seed(8);
    let mean_acc: f64 = (0..2000).map(|_| kernel.transition(&mut pos, &view, &mut r).unwrap().accept_stat).sum::<f64>() / 2000.0;
    assert!(mean_acc > 0.9999, "{mean_acc}");
}

#[test]
fn hmc_ten_dimensional_gaussian_mean() {
    let d = bundled_by_name("gauss-10d").unwrap();
    let out = run(&d, &spec(SamplerKind::Hmc), 1_000, 10_000, 9);
    for dim in 0..10 {
        let col = out.chain.column(dim);
        let e = ess(&col).unwrap().value;
        assert!(mean(&col).abs() < 4.0 / e.sqrt(), "dim {dim}: mean {} ess {e}", mean(&col));
    }
}

#[test]
fn frozen_kernels_are_offset_invariant() {
    let d = bundled_by_name("mog2-2d").unwrap();
    for kind in SamplerKind::ALL {
        let s = frozen(kind);
        let view = view_of(&d);
        let plain = run_on(&view, &d, &s, 0, 1_000, 10);
        let shifted_view = view_of(&d);
        let offset = Offset {
            inner: &shifted_view,
            c: 123.456,
        };
        let shifted = run_on(&offset, &d, &s, 0, 1_000, 10);
        assert_eq!(plain.chain, shifted.chain, "{kind}");
    }
}

#[test]
fn adaptive_kernels_stay_close_under_offset() {
    let d = bundled_by_name("corr-2d").unwrap();
    for kind in [SamplerKind::RwmGauss, SamplerKind::Hmc, SamplerKind::Nuts] {
        let view = view_of(&d);
        let plain = run_on(&view, &d, &spec(kind), 200, 0, 11);
        let other = view_of(&d);
        let shifted = run_on(&Offset { inner: &other, c: -77.25 }, &d, &spec(kind), 200, 0, 11);
        for (a, b) in plain.sampler.tuning().iter().zip(shifted.sampler.tuning()) {
            // rounding differences feed back through adaptation, so only closeness is expected
            assert!((a - b).abs() <= 0.15 * a.abs(), "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn tuning_is_constant_after_freeze() {
    let d = bundled_by_name("corr-2d").unwrap();
    for kind in SamplerKind::ALL {
        let view = view_of(&d);
        let mut out = run_on(&view, &d, &spec(kind), 300, 0, 12);
        let before = out.sampler.tuning();
        let mut sink = SampleMatrix::new(2);
        for _ in 0..300 {
            out.sampler.step(&view, &mut out.rng, &mut sink).unwrap();
        }
        assert_eq!(before, out.sampler.tuning(), "{kind}");
    }
}

#[test]
fn nuts_depth_one_is_a_single_leapfrog_with_mh_selection() {
    let d = bundled_by_name("corr-2d").unwrap();
    let view = view_of(&d);
    let scale = vec![1.0, 4.0];
    let inv_mass: Vec<f64> = scale.iter().map(|s| s * s).collect();
    let mut k = Nuts::new(scale.clone(), Some(0.3), 1, 0.8, false);
    let mut pos = Position::evaluate(&view, vec![-0.5, 2.0], true).unwrap();
    let mut r = rng::from_seed(13);
    for _ in 0..200 {
        let mut mirror = r.clone();
        let start = pos.clone();
        let stats = k.transition(&mut pos, &view, &mut r).unwrap();
        assert_eq!(stats.leapfrog_steps, 1);
        // replay the same random stream by hand
        let p: Vec<f64> = inv_mass
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut mirror);
                z / m.sqrt()
            })
            .collect();
        let dir = if mirror.random::<bool>() { 1.0 } else { -1.0 };
        let g = start.grad.clone().unwrap();
        let out = leapfrog(&view, &start.x, &p, start.logp, &g, dir * 0.3, 1, &inv_mass).unwrap();
        let ke = |p: &[f64]| 0.5 * p.iter().zip(&inv_mass).map(|(p, m)| p * p * m).sum::<f64>();
        let dh = (-start.logp + ke(&p)) - (-out.logp + ke(&out.p));
        let u: f64 = mirror.random();
        let expected = if u.ln() < dh { out.x } else { start.x };
        assert_eq!(pos.x, expected);
    }
}

#[test]
fn nuts_adapts_to_target_acceptance() {
    let d = gauss1();
    let view = view_of(&d);
    let out = run_on(&view, &d, &spec(SamplerKind::Nuts), 2_000, 0, 14);
    let Sampler::Single { mut kernel, mut pos } = out.sampler else { panic!() };
    let mut r = rng::from_seed(15);
    let n = 5_000;
    let acc: f64 = (0..n).map(|_| kernel.transition(&mut pos, &view, &mut r).unwrap().accept_stat).sum::<f64>() / n as f64;
    assert!((acc - 0.8).abs() < 0.1, "{acc}");
}

#[test]
fn nuts_correlated_gaussian_marginals() {
    let d = bundled_by_name("corr-2d").unwrap();
    let out = run(&d, &spec(SamplerKind::Nuts), 1_000, 10_000, 16);
    for o in ks_stationarity(&d, &out.chain, 1) {
        assert!(o.p_value > 0.01, "{o:?}");
    }
}

#[test]
fn slice_bracket_concentrates_near_mode() {
    let d = gauss1();
    let view = view_of(&d);
    let k = Slice::new(vec![1.0], 50);
    let mut r = rng::from_seed(17);
    let mut x = vec![0.0];
    let height = view.log_density(&x).unwrap() - 0.01;
    let half_width = (2.0f64 * 0.01).sqrt();
    for _ in 0..2000 {
        let (lo, hi) = k.step_out(&view, &mut x, 0, height, &mut r).unwrap();
        assert!(lo <= -half_width || hi - lo >= 1.0);
        let (v, _) = Slice::shrink(&view, &mut x, 0, height, (lo, hi), &mut r).unwrap().unwrap();
        assert!(v.abs() < half_width, "{v}");
    }
}

#[test]
fn slice_standard_normal_marginal() {
    let d = gauss1();
    let out = run(&d, &spec(SamplerKind::Slice), 0, 10_000, 18);
    for o in ks_stationarity(&d, &out.chain, 1) {
        assert!(o.p_value > 0.01, "{o:?}");
    }
}

#[test]
fn slice_first_update_is_symmetric() {
    let d = gauss1();
    let view = view_of(&d);
    let n = 4000;
    let draws: Vec<f64> = (0..n)
        .map(|s| {
            let mut k = Slice::new(vec![1.0], 50);
            let mut pos = Position::evaluate(&view, vec![0.0], false).unwrap();
            k.transition(&mut pos, &view, &mut rng::from_seed(1000 + s)).unwrap();
            pos.x[0]
        })
        .collect();
    let pos = draws.iter().filter(|v| **v > 0.0).count() as f64;
    assert!((pos - n as f64 / 2.0).abs() < 4.0 * (n as f64 / 4.0).sqrt());
    let sd = (draws.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    assert!(mean(&draws).abs() < 4.0 * sd / (n as f64).sqrt());
}

fn emcee_points(d: &BenchmarkDensity, w: usize, seed: u64) -> Vec<Vec<f64>> {
    init_chain(InitMode::Exact, d, w, &mut rng::from_seed(seed)).points
}

#[test]
fn emcee_unit_stretch_freezes_ensemble() {
    let d = bundled_by_name("corr-2d").unwrap();
    let view = view_of(&d);
    let mut s = spec(SamplerKind::Emcee);
    s.stretch = Some(1.0);
    let pts = emcee_points(&d, 10, 19);
    let mut e = Emcee::new(&s, &view, &pts).unwrap();
    let mut r = rng::from_seed(19);
    for _ in 0..50 {
        let st = e.sweep(&view, &mut r).unwrap();
        assert_eq!(st.accept_stat, 1.0);
    }
    assert_eq!(e.walkers(), &pts[..]);
}

#[test]
fn emcee_collapsed_ensemble_errors() {
    let d = bundled_by_name("corr-2d").unwrap();
    let view = view_of(&d);
    let pts = vec![vec![0.1, 0.2]; 10];
    let mut e = Emcee::new(&spec(SamplerKind::Emcee), &view, &pts).unwrap();
    let err = e.sweep(&view, &mut rng::from_seed(1)).unwrap_err();
    assert!(err.to_string().contains("re-initialize"));
}

#[test]
fn emcee_is_affine_equivariant() {
    let d = bundled_by_name("mog2-2d").unwrap();
    let base = view_of(&d);
    let a = vec![vec![2.0, 0.5], vec![-0.3, 1.5]];
    let det: f64 = 2.0 * 1.5 + 0.5 * 0.3;
    let a_inv = vec![vec![1.5 / det, -0.5 / det], vec![0.3 / det, 2.0 / det]];
    let mapped = Affine {
        inner: &base,
        a,
        a_inv,
        b: vec![1.0, -2.0],
        log_abs_det: det.ln(),
    };
    let s = spec(SamplerKind::Emcee);
    let pts = emcee_points(&d, 10, 20);
    let mapped_pts: Vec<Vec<f64>> = pts.iter().map(|p| mapped.forward(p)).collect();
    let mut e1 = Emcee::new(&s, &base, &pts).unwrap();
    let mut e2 = Emcee::new(&s, &mapped, &mapped_pts).unwrap();
    let (mut r1, mut r2) = (rng::from_seed(21), rng::from_seed(21));
    for sweep in 0..200 {
        let before1 = e1.walkers().to_vec();
        let before2 = e2.walkers().to_vec();
        e1.sweep(&base, &mut r1).unwrap();
        e2.sweep(&mapped, &mut r2).unwrap();
        for k in 0..10 {
            assert_eq!(before1[k] != e1.walkers()[k], before2[k] != e2.walkers()[k]);
            // rounding differences grow geometrically, so the horizon is kept short
            let image = mapped.forward(&e1.walkers()[k]);
            for (u, v) in image.iter().zip(&e2.walkers()[k]) {
                assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()), "sweep {sweep} walker {k}: {u} vs {v}");
            }
        }
    }
}

#[test]
fn emcee_pooled_mean_on_standard_normal() {
    let core = MixtureOfGaussians::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
    let d = BenchmarkDensity::new("n2", core, AffineTransform::identity(2)).unwrap();
    let out = run(&d, &spec(SamplerKind::Emcee), 500, 10_000, 22);
    for dim in 0..2 {
        let series = common::deinterleave(&out.chain, dim, out.rows_per_step);
        let total_ess: f64 = series.iter().map(|s| ess(s).unwrap().value).sum();
        let m = mean(&out.chain.column(dim));
        assert!(m.abs() < 4.0 / total_ess.sqrt(), "dim {dim}: {m} with ess {total_ess}");
    }
}

#[test]
fn mix_with_unit_weight_matches_first_component() {
    let d = bundled_by_name("corr-2d").unwrap();
    let mut m = spec(SamplerKind::Mix);
    m.mix_nuts_prob = Some(1.0);
    let a = run(&d, &m, 100, 500, 23);
    let b = run(&d, &spec(SamplerKind::Nuts), 100, 500, 23);
    assert_eq!(a.chain, b.chain);
}

#[test]
fn mix_component_usage_is_binomial() {
    let d = gauss1();
    let view = view_of(&d);
    let mut m = spec(SamplerKind::Mix);
    m.mix_nuts_prob = Some(0.5);
    let out = run_on(&view, &d, &m, 0, 0, 24);
    let Sampler::Single { mut kernel, mut pos } = out.sampler else { panic!() };
    let mut r = rng::from_seed(25);
    let n = 10_000;
    let first = (0..n)
        .filter(|_| kernel.transition(&mut pos, &view, &mut r).unwrap().component == Some(0))
        .count() as f64;
    assert!((first - 0.5 * n as f64).abs() < 4.0 * (n as f64 * 0.25).sqrt());
}

#[test]
fn mix_standard_normal_marginal() {
    let d = gauss1();
    let out = run(&d, &spec(SamplerKind::Mix), 1_000, 20_000, 26);
    for o in ks_stationarity(&d, &out.chain, 1) {
        assert!(o.p_value > 0.01, "{o:?}");
    }
}

#[test]
fn exact_init_matches_sample_exact() {
    let d = bundled_by_name("mog2-2d").unwrap();
    let init = init_chain(InitMode::Exact, &d, 1, &mut rng::from_seed(27));
    let direct = d.sample_exact(1, &mut rng::from_seed(27));
    assert_eq!(init.points[0], direct.row(0));
}

#[test]
fn approx_init_scale_guess() {
    let core = MixtureOfGaussians::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
    let d = BenchmarkDensity::new("wide", core, AffineTransform::new(vec![1.0, 10.0], vec![0.0, 0.0]).unwrap()).unwrap();
    let init = init_chain(InitMode::Approx, &d, 3, &mut rng::from_seed(28));
    assert!((init.scale_guess[0] - 1.0).abs() < 0.2);
    assert!((init.scale_guess[1] - 10.0).abs() < 2.0);
    assert_eq!(init.points.len(), 3);
}

#[test]
fn both_init_modes_start_finite() {
    for d in mcbench::density::bundled() {
        let view = view_of(&d);
        for mode in [InitMode::Exact, InitMode::Approx] {
            let init = init_chain(mode, &d, 2, &mut rng::from_seed(29));
            for p in &init.points {
                assert!(p.iter().all(|v| v.is_finite()));
                assert!(view.log_density(p).unwrap().is_finite());
            }
        }
    }
}

/// Dense, well-conditioned map `y = A x + b` with its inverse.
fn dense_affine<'a>(inner: &'a dyn LogDensity, dim: usize, seed: u64) -> Affine<'a> {
    let mut r = rng::from_seed(seed);
    let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| {
        let z: f64 = StandardNormal.sample(&mut r);
        if i == j { 2.0 + 0.3 * z } else { 0.2 * z }
    });
    let inv = m.clone().try_inverse().expect("invertible");
    let rows = |x: &nalgebra::DMatrix<f64>| (0..dim).map(|i| (0..dim).map(|j| x[(i, j)]).collect()).collect();
    Affine {
        inner,
        a: rows(&m),
        a_inv: rows(&inv),
        b: (0..dim).map(|i| i as f64 - 3.0).collect(),
        log_abs_det: m.determinant().abs().ln(),
    }
}

#[test]
fn emcee_affine_equivariance_over_a_thousand_sweeps_in_ten_dimensions() {
    let d = bundled_by_name("mog8-10d").unwrap();
    let base = view_of(&d);
    let mapped = dense_affine(&base, 10, 30);
    let s = spec(SamplerKind::Emcee);
    let pts = emcee_points(&d, s.walkers(10), 31);
    let mapped_pts: Vec<Vec<f64>> = pts.iter().map(|p| mapped.forward(p)).collect();
    let mut e1 = Emcee::new(&s, &base, &pts).unwrap();
    let mut e2 = Emcee::new(&s, &mapped, &mapped_pts).unwrap();
    let (mut r1, mut r2) = (rng::from_seed(32), rng::from_seed(32));
    for sweep in 0..1000 {
        let before1 = e1.walkers().to_vec();
        let before2 = e2.walkers().to_vec();
        e1.sweep(&base, &mut r1).unwrap();
        e2.sweep(&mapped, &mut r2).unwrap();
        for k in 0..before1.len() {
            assert_eq!(before1[k] != e1.walkers()[k], before2[k] != e2.walkers()[k], "sweep {sweep}");
            let image = mapped.forward(&e1.walkers()[k]);
            for (u, v) in image.iter().zip(&e2.walkers()[k]) {
                assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()), "sweep {sweep}: {u} vs {v}");
            }
        }
    }
}
