use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::density::{bundled_by_name, load_density, BenchmarkDensity, BUNDLED_NAMES};
use crate::samplers::{InitMode, SamplerSpec};

/// Default number of exact draws per ground-truth set.
pub const DEFAULT_GROUND_TRUTH_DRAWS: usize = 100_000;

/// How much work each chain may do.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Budget {
    /// Density and gradient calls, each counting one. Deterministic.
    Evaluations { amount: u64 },
    /// Thread CPU seconds.
    WallClock { amount: f64 },
}

impl Default for Budget {
    fn default() -> Self {
        Budget::WallClock { amount: 900.0 }
    }
}

impl Budget {
    pub fn amount(&self) -> f64 {
        match *self {
            Budget::Evaluations { amount } => amount as f64,
            Budget::WallClock { amount } => amount,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Budget::Evaluations { .. })
    }

    /// Budget consumed at checkpoint `j` of `checkpoints` (1-based).
    pub fn checkpoint_boundary(&self, j: usize, checkpoints: usize) -> f64 {
        self.amount() * j as f64 / checkpoints as f64
    }

    pub fn unit(&self) -> &'static str {
        match self {
            Budget::Evaluations { .. } => "evaluations",
            Budget::WallClock { .. } => "thread_cpu_seconds",
        }
    }
}

fn default_k() -> usize {
    8
}
fn default_checkpoints() -> usize {
    100
}
fn default_init() -> InitMode {
    InitMode::Exact
}
fn default_output() -> PathBuf {
    PathBuf::from("mcbench-out")
}
fn default_gt_draws() -> usize {
    DEFAULT_GROUND_TRUTH_DRAWS
}
fn default_adapt_fraction() -> f64 {
    0.2
}

/// A benchmark run: every sampler on every example, `k` chains each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled density names or density file paths (relative paths resolve
    /// against the config file's directory).
    pub examples: Vec<String>,
    pub samplers: Vec<SamplerSpec>,
    /// Chains per (example, sampler) pair.
    #[serde(default = "default_k", alias = "chains")]
    pub k: usize,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_init")]
    pub init_mode: InitMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_gt_draws")]
    pub ground_truth_draws: usize,
    /// Leading share of the budget during which samplers adapt. Samples from
    /// the window are kept.
    #[serde(default = "default_adapt_fraction")]
    pub adapt_fraction: f64,
}

impl RunConfig {
    pub fn new(examples: Vec<String>, samplers: Vec<SamplerSpec>, budget: Budget) -> Self {
        Self {
            examples,
            samplers,
            k: default_k(),
            budget,
            checkpoints: default_checkpoints(),
            init_mode: default_init(),
            seed: 0,
            output_dir: default_output(),
            ground_truth_draws: default_gt_draws(),
            adapt_fraction: default_adapt_fraction(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.examples.is_empty() {
            return bad("no examples configured".into());
        }
        if self.samplers.is_empty() {
            return bad("no samplers configured".into());
        }
        if self.k == 0 {
            return bad("k (chains per pair) must be >= 1".into());
        }
        if self.checkpoints == 0 {
            return bad("checkpoints must be >= 1".into());
        }
        if !(self.budget.amount() > 0.0) || !self.budget.amount().is_finite() {
            return bad(format!("budget must be positive, got {}", self.budget.amount()));
        }
        if !(0.0..1.0).contains(&self.adapt_fraction) {
            return bad(format!("adapt_fraction must be in [0, 1), got {}", self.adapt_fraction));
        }
        if self.ground_truth_draws < 2 {
            return bad("ground_truth_draws must be >= 2".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.samplers {
            if !names.insert(s.name()) {
                return bad(format!("duplicate sampler name {:?}", s.name()));
            }
        }
        Ok(())
    }

    /// Loads every example. Names must be unique.
    pub fn resolve_examples(&self, base_dir: Option<&Path>) -> Result<Vec<BenchmarkDensity>, HarnessError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.examples.len());
        for e in &self.examples {
            let d = resolve_example(e, base_dir)?;
            for s in &self.samplers {
                s.validate(d.dim()).map_err(|err| HarnessError::Config(format!("{} on {}: {err}", s.name(), d.name())))?;
            }
            if !seen.insert(d.name().to_string()) {
                return Err(HarnessError::Config(format!("duplicate example name {:?}", d.name())));
            }
            out.push(d);
        }
        Ok(out)
    }
}

/// A bundled name (optionally prefixed `bundled:`) or a density file path.
pub fn resolve_example(source: &str, base_dir: Option<&Path>) -> Result<BenchmarkDensity, HarnessError> {
    if let Some(name) = source.strip_prefix("bundled:") {
        return Ok(bundled_by_name(name)?);
    }
    if BUNDLED_NAMES.contains(&source) {
        return Ok(bundled_by_name(source)?);
    }
    let path = Path::new(source);
    let path = match base_dir {
        Some(b) if path.is_relative() => b.join(path),
        _ => path.to_path_buf(),
    };
    Ok(load_density(path)?)
}
