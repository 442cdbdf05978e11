use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Budget, RunConfig};
use super::ground_truth::{generate_ground_truth, GroundTruth};
use super::store::{read_json, sanitize, write_json, Chain, ChainHeader, Checkpoint};
use super::HarnessError;
use crate::density::{load_density, save_density, BenchmarkDensity, BlackBoxView, LogDensity};
use crate::rng::{self, derive_seed};
use crate::samplers::{init_chain, Sampler, SamplerSpec};
use crate::SampleMatrix;

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "CLOCK_THREAD_CPUTIME_ID unavailable");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Seed of chain `chain` of `sampler` on `example`.
pub fn chain_seed(master: u64, example: &str, sampler: &str, chain: usize) -> u64 {
    derive_seed(master, &[example.into(), sampler.into(), chain.into()])
}

pub fn ground_truth_seed(master: u64, example: &str) -> u64 {
    derive_seed(master, &["ground_truth".into(), example.into()])
}

/// Runs one chain until its budget is exhausted. Sampler failures end the
/// chain early and are recorded in the header; they are not errors here.
pub fn run_chain(density: &BenchmarkDensity, spec: &SamplerSpec, config: &RunConfig, chain: usize) -> Chain {
    let sampler_name = spec.name();
    let seed = chain_seed(config.seed, density.name(), &sampler_name, chain);
    let mut r = rng::from_seed(seed);
    let dim = density.dim();
    let view = BlackBoxView::new(Arc::new(density.clone()));
    let init = init_chain(config.init_mode, density, spec.n_init_points(dim), &mut r);
    let mut samples = SampleMatrix::new(dim);
    let mut header = ChainHeader {
        example: density.name().to_string(),
        sampler: sampler_name,
        chain,
        seed,
        dim,
        rows: 0,
        rows_per_step: 1,
        init_evaluations: 0,
        evaluations: 0,
        cpu_seconds: None,
        transitions: 0,
        accept_rate: f64::NAN,
        adapt_end_row: 0,
        checkpoints: Vec::with_capacity(config.checkpoints),
        failure: None,
    };
    let start_cpu = thread_cpu_seconds();
    let mut sampler = match Sampler::new(spec, &view, &init) {
        Ok(s) => s,
        Err(e) => {
            header.failure = Some(format!("initialization: {e}"));
            header.init_evaluations = view.evaluations();
            header.checkpoints = vec![Checkpoint { rows: 0, evaluations: 0, cpu_seconds: None }; config.checkpoints];
            return Chain { header, samples };
        }
    };
    header.rows_per_step = sampler.rows_per_step();
    let baseline = view.evaluations();
    header.init_evaluations = baseline;
    let budget = config.budget;
    let total = budget.amount();
    if let Budget::Evaluations { amount } = budget {
        view.set_eval_limit(Some(baseline + amount));
    }
    let wall = !budget.is_deterministic();
    let consumed = |view: &BlackBoxView| match budget {
        Budget::Evaluations { .. } => (view.evaluations() - baseline) as f64,
        Budget::WallClock { .. } => thread_cpu_seconds() - start_cpu,
    };
    let mut adapting = spec.adapt() && config.adapt_fraction > 0.0;
    if !adapting {
        sampler.freeze();
    }
    let adapt_until = config.adapt_fraction * total;
    let mut accept_sum = 0.0;
    let mut next = 1;
    let record = |header: &mut ChainHeader, rows: usize, view: &BlackBoxView| {
        header.checkpoints.push(Checkpoint {
            rows,
            evaluations: view.evaluations() - baseline,
            cpu_seconds: wall.then(|| thread_cpu_seconds() - start_cpu),
        });
    };
    loop {
        if wall && consumed(&view) >= total {
            break;
        }
        match sampler.step(&view, &mut r, &mut samples) {
            Ok(stats) => {
                header.transitions += 1;
                accept_sum += stats.accept_stat;
            }
            Err(e) if e.is_budget() => break,
            Err(e) => {
                log::warn!("{} / {} chain {chain}: {e}", header.example, header.sampler);
                header.failure = Some(e.to_string());
                break;
            }
        }
        let used = consumed(&view);
        if adapting && used >= adapt_until {
            sampler.freeze();
            adapting = false;
            header.adapt_end_row = samples.n_rows();
        }
        while next <= config.checkpoints && used >= budget.checkpoint_boundary(next, config.checkpoints) {
            record(&mut header, samples.n_rows(), &view);
            next += 1;
        }
        if !wall && used >= total {
            break;
        }
    }
    if adapting {
        header.adapt_end_row = samples.n_rows();
    }
    while next <= config.checkpoints {
        record(&mut header, samples.n_rows(), &view);
        next += 1;
    }
    header.rows = samples.n_rows();
    header.evaluations = view.evaluations() - baseline;
    header.cpu_seconds = wall.then(|| thread_cpu_seconds() - start_cpu);
    header.accept_rate = if header.transitions > 0 { accept_sum / header.transitions as f64 } else { f64::NAN };
    Chain { header, samples }
}

/// `config.k` chains of one sampler on one example, run in parallel.
pub fn run_pair(density: &BenchmarkDensity, spec: &SamplerSpec, config: &RunConfig) -> Vec<Chain> {
    (0..config.k).into_par_iter().map(|c| run_chain(density, spec, config, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestExample {
    pub name: String,
    pub source: String,
    pub dim: usize,
    pub ground_truth_seed: u64,
    pub ground_truth_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestChain {
    pub example: String,
    pub sampler: String,
    pub chain: usize,
    pub seed: u64,
    pub rows: usize,
    pub evaluations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub budget_unit: String,
    /// Cost of one gradient query in budget units (deterministic mode).
    pub gradient_cost: u64,
    pub config: RunConfig,
    pub examples: Vec<ManifestExample>,
    pub chains: Vec<ManifestChain>,
}

/// In-memory results of a run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub densities: Vec<BenchmarkDensity>,
    pub ground_truth: BTreeMap<String, GroundTruth>,
    pub chains: Vec<Chain>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunArtifacts {
    pub fn density(&self, name: &str) -> Option<&BenchmarkDensity> {
        self.densities.iter().find(|d| d.name() == name)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            tool: "mcbench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            budget_unit: self.config.budget.unit().into(),
            gradient_cost: 1,
            config: self.config.clone(),
            examples: self
                .densities
                .iter()
                .zip(&self.config.examples)
                .map(|(d, source)| ManifestExample {
                    name: d.name().into(),
                    source: source.clone(),
                    dim: d.dim(),
                    ground_truth_seed: self.ground_truth[d.name()].header.seed,
                    ground_truth_draws: self.ground_truth[d.name()].header.n,
                })
                .collect(),
            chains: self
                .chains
                .iter()
                .map(|c| ManifestChain {
                    example: c.header.example.clone(),
                    sampler: c.header.sampler.clone(),
                    chain: c.header.chain,
                    seed: c.header.seed,
                    rows: c.header.rows,
                    evaluations: c.header.evaluations,
                    failure: c.header.failure.clone(),
                })
                .collect(),
        }
    }

    /// Writes examples, ground truth, chains and the manifest under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        for d in &self.densities {
            let path = examples_dir(dir).join(format!("{}.json", sanitize(d.name())));
            super::store::ensure_dir(&examples_dir(dir))?;
            save_density(d, path)?;
        }
        for gt in self.ground_truth.values() {
            gt.save(&ground_truth_dir(dir))?;
        }
        for c in &self.chains {
            c.save(&chains_dir(dir))?;
        }
        write_json(&dir.join(MANIFEST_FILE), &self.manifest())
    }

    /// Reloads a saved run from its manifest.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
        let mut densities = Vec::new();
        let mut ground_truth = BTreeMap::new();
        for e in &manifest.examples {
            let d = load_density(examples_dir(dir).join(format!("{}.json", sanitize(&e.name))))?;
            let gt = GroundTruth::load(&ground_truth_dir(dir), &e.name)
                .map_err(|_| HarnessError::MissingGroundTruth(e.name.clone()))?;
            ground_truth.insert(e.name.clone(), gt);
            densities.push(d);
        }
        let mut chains = Vec::with_capacity(manifest.chains.len());
        for c in &manifest.chains {
            match Chain::load(&chains_dir(dir), &c.example, &c.sampler, c.chain) {
                Ok(chain) => chains.push(chain),
                Err(e) => log::warn!("chain {}/{}/{} unavailable: {e}", c.example, c.sampler, c.chain),
            }
        }
        Ok(Self {
            config: manifest.config,
            densities,
            ground_truth,
            chains,
        })
    }
}

pub fn examples_dir(dir: &Path) -> PathBuf {
    dir.join("examples")
}
pub fn ground_truth_dir(dir: &Path) -> PathBuf {
    dir.join("ground_truth")
}
pub fn chains_dir(dir: &Path) -> PathBuf {
    dir.join("chains")
}

/// Ground truth for every example, seeded from the master seed.
pub fn generate_all_ground_truth(densities: &[BenchmarkDensity], config: &RunConfig) -> BTreeMap<String, GroundTruth> {
    densities
        .par_iter()
        .map(|d| {
            let seed = ground_truth_seed(config.seed, d.name());
            (d.name().to_string(), generate_ground_truth(d, config.ground_truth_draws, seed))
        })
        .collect()
}

/// Runs every (example, sampler, chain) task on the worker pool.
pub fn run_benchmark(densities: Vec<BenchmarkDensity>, config: &RunConfig) -> RunArtifacts {
    let ground_truth = generate_all_ground_truth(&densities, config);
    let tasks: Vec<(usize, usize, usize)> = (0..densities.len())
        .flat_map(|e| (0..config.samplers.len()).flat_map(move |s| (0..config.k).map(move |c| (e, s, c))))
        .collect();
    let chains = tasks
        .par_iter()
        .map(|&(e, s, c)| {
            let chain = run_chain(&densities[e], &config.samplers[s], config, c);
            log::info!(
                "{} / {} chain {c}: {} rows, {} evaluations",
                chain.header.example,
                chain.header.sampler,
                chain.header.rows,
                chain.header.evaluations
            );
            chain
        })
        .collect();
    RunArtifacts {
        config: config.clone(),
        densities,
        ground_truth,
        chains,
    }
}
