//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::sync::Arc;

use mcbench::density::{BenchmarkDensity, BlackBoxView, EvalError, LogDensity};
use mcbench::diagnostics;
use mcbench::harness::{generate_all_ground_truth, Budget, Chain, ChainHeader, Checkpoint, RunArtifacts, RunConfig};
use mcbench::meta::{features, MetaDataset, MetaRow};
use mcbench::metrics::ks_statistic;
use mcbench::rng::{self, Rng};
use mcbench::samplers::{init_chain, InitMode, Sampler, SamplerKind, SamplerSpec};
use mcbench::special::ks_pvalue;
use mcbench::SampleMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Adds a constant to every log-density value of the wrapped view.
pub struct Offset<'a> {
    pub inner: &'a dyn LogDensity,
    pub c: f64,
}

impl LogDensity for Offset<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_density(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.inner.log_density(x)? + self.c)
    }
    fn grad_log_density(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        let (lp, g) = self.inner.grad_log_density(x)?;
        Ok((lp + self.c, g))
    }
    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
}

/// The pushforward of a view under `y = A x + b` (dense, invertible `A`,
/// given with its inverse).
pub struct Affine<'a> {
    pub inner: &'a dyn LogDensity,
    pub a: Vec<Vec<f64>>,
    pub a_inv: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub log_abs_det: f64,
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

impl Affine<'_> {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.a, x).iter().zip(&self.b).map(|(v, b)| v + b).collect()
    }
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let centred: Vec<f64> = y.iter().zip(&self.b).map(|(v, b)| v - b).collect();
        mat_vec(&self.a_inv, &centred)
    }
}

impl LogDensity for Affine<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_density(&self, y: &[f64]) -> Result<f64, EvalError> {
        Ok(self.inner.log_density(&self.backward(y))? - self.log_abs_det)
    }
    fn grad_log_density(&self, _y: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        unimplemented!("only used with gradient-free samplers")
    }
    fn evaluations(&self) -> u64 {
        self.inner.evaluations()
    }
}

pub fn view_of(density: &BenchmarkDensity) -> BlackBoxView {
    BlackBoxView::new(Arc::new(density.clone()))
}

pub struct Run {
    /// Rows emitted after the adaptation window.
    pub chain: SampleMatrix,
    pub rows_per_step: usize,
    pub sampler: Sampler,
    pub rng: Rng,
}

/// Runs `warmup` adaptive transitions, freezes, then `n` more transitions
/// on `view`, starting from an exact draw.
pub fn run_on(
    view: &dyn LogDensity,
    density: &BenchmarkDensity,
    spec: &SamplerSpec,
    warmup: usize,
    n: usize,
    seed: u64,
) -> Run {
    let mut r = rng::from_seed(seed);
    let init = init_chain(InitMode::Exact, density, spec.n_init_points(density.dim()), &mut r);
    let mut sampler = Sampler::new(spec, view, &init).expect("sampler builds");
    let mut scratch = SampleMatrix::new(density.dim());
    for _ in 0..warmup {
        sampler.step(view, &mut r, &mut scratch).expect("warmup step");
    }
    sampler.freeze();
    let mut chain = SampleMatrix::with_capacity(density.dim(), n * sampler.rows_per_step());
    for _ in 0..n {
        sampler.step(view, &mut r, &mut chain).expect("step");
    }
    Run {
        rows_per_step: sampler.rows_per_step(),
        chain,
        sampler,
        rng: r,
    }
}

pub fn run(density: &BenchmarkDensity, spec: &SamplerSpec, warmup: usize, n: usize, seed: u64) -> Run {
    let view = view_of(density);
    run_on(&view, density, spec, warmup, n, seed)
}

pub fn spec(kind: SamplerKind) -> SamplerSpec {
    SamplerSpec::new(kind)
}

/// Splits an interleaved ensemble chain into per-walker series of dimension `d`.
pub fn deinterleave(chain: &SampleMatrix, d: usize, walkers: usize) -> Vec<Vec<f64>> {
    let col = chain.column(d);
    (0..walkers).map(|w| col.iter().skip(w).step_by(walkers).copied().collect()).collect()
}

#[derive(Debug)]
pub struct KsOutcome {
    pub dim: usize,
    pub thin: usize,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Marginal KS test of a post-adaptation chain against the exact CDFs.
///
/// Each series (one per walker for ensembles) is thinned by
/// `max(10, ceil(2 tau))`, where `tau = N / ESS` is the largest estimated
/// integrated autocorrelation time over series and dimensions, so that the
/// retained draws are close to independent.
pub fn ks_stationarity(density: &BenchmarkDensity, chain: &SampleMatrix, rows_per_step: usize) -> Vec<KsOutcome> {
    (0..density.dim())
        .map(|d| {
            let series = deinterleave(chain, d, rows_per_step);
            let tau = (0..density.dim())
                .flat_map(|dd| deinterleave(chain, dd, rows_per_step))
                .map(|s| s.len() as f64 / diagnostics::ess(&s).unwrap().value)
                .fold(1.0f64, f64::max);
            let thin = ((2.0 * tau).ceil() as usize).max(10);
            let kept: Vec<f64> = series.iter().flat_map(|s| s.iter().step_by(thin).copied()).collect();
            let statistic = ks_statistic(&kept, |a| density.marginal_cdf(d, a).unwrap());
            KsOutcome {
                dim: d,
                thin,
                n: kept.len(),
                statistic,
                p_value: ks_pvalue(statistic, kept.len()),
            }
        })
        .collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// A stored chain built directly from samples, with checkpoints evenly
/// spaced over its rows.
pub fn pseudo_chain(example: &str, sampler: &str, chain: usize, samples: SampleMatrix, checkpoints: usize) -> Chain {
    let n = samples.n_rows();
    Chain {
        header: ChainHeader {
            example: example.into(),
            sampler: sampler.into(),
            chain,
            seed: 0,
            dim: samples.dim(),
            rows: n,
            rows_per_step: 1,
            init_evaluations: 0,
            evaluations: n as u64,
            cpu_seconds: None,
            transitions: n as u64,
            accept_rate: 1.0,
            adapt_end_row: 0,
            checkpoints: (1..=checkpoints)
                .map(|j| Checkpoint {
                    rows: n * j / checkpoints,
                    evaluations: (n * j / checkpoints) as u64,
                    cpu_seconds: None,
                })
                .collect(),
            failure: None,
        },
        samples,
    }
}

/// Artifacts for hand-made chains. `chains[s]` holds the K sample sets of
/// pseudo-sampler `names[s]` on `density`.
pub fn pseudo_artifacts(
    densities: &[BenchmarkDensity],
    names: &[&str],
    chains: impl Fn(&BenchmarkDensity, usize) -> Vec<SampleMatrix>,
    checkpoints: usize,
    gt_draws: usize,
    seed: u64,
) -> RunArtifacts {
    let samplers: Vec<SamplerSpec> = names
        .iter()
        .map(|n| {
            let mut s = SamplerSpec::new(SamplerKind::RwmGauss);
            s.name = Some((*n).into());
            s
        })
        .collect();
    let mut config = RunConfig::new(
        densities.iter().map(|d| d.name().to_string()).collect(),
        samplers,
        Budget::Evaluations { amount: 1 },
    );
    config.checkpoints = checkpoints;
    config.ground_truth_draws = gt_draws;
    config.seed = seed;
    let mut all = Vec::new();
    for d in densities {
        for (s, name) in names.iter().enumerate() {
            let sets = chains(d, s);
            config.k = sets.len();
            for (c, m) in sets.into_iter().enumerate() {
                all.push(pseudo_chain(d.name(), name, c, m, checkpoints));
            }
        }
    }
    RunArtifacts {
        ground_truth: generate_all_ground_truth(densities, &config),
        config,
        densities: densities.to_vec(),
        chains: all,
    }
}

/// `k` independent exact sample sets of `n` rows.
pub fn iid_sets(density: &BenchmarkDensity, k: usize, n: usize, seed: u64) -> Vec<SampleMatrix> {
    (0..k).map(|c| density.sample_exact(n, &mut rng::stream(seed, &[c.into()]))).collect()
}

/// Synthetic meta-analysis rows over `n_examples` examples. With `signal`
/// the target is `2 sin(log ESS) + 0.3 e`; without it the target is pure
/// standard normal noise. The other features are noise either way.
pub fn synthetic_meta(n_examples: usize, rows_per_example: usize, signal: bool, seed: u64) -> MetaDataset {
    let mut r = rng::stream(seed, &["synthetic-meta".into()]);
    let mut rows = Vec::new();
    for e in 0..n_examples {
        let dim = [1usize, 2, 5, 10][e % 4];
        for s in 0..rows_per_example {
            let log_ess: f64 = r.random_range(1.0..8.0);
            let gr = 1.0 + r.random_range(0.0f64..0.2);
            let gw: f64 = StandardNormal.sample(&mut r);
            let noise: f64 = StandardNormal.sample(&mut r);
            let target = if signal { 2.0 * log_ess.sin() + 0.3 * noise } else { noise };
            rows.push(MetaRow {
                example: format!("ex{e:03}"),
                sampler: format!("s{s}"),
                features: features(log_ess.exp(), gr, gw, dim),
                target,
            });
        }
    }
    MetaDataset {
        rows,
        ..MetaDataset::default()
    }
}
