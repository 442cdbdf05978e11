use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Hmc, KernelImpl, Mix, Nuts, ProposalFamily, Rwm, SamplerError, Slice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    RwmGauss,
    RwmCauchy,
    RwmLaplace,
    Hmc,
    Nuts,
    Slice,
    Emcee,
    Mix,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 8] = [
        Self::RwmGauss,
        Self::RwmCauchy,
        Self::RwmLaplace,
        Self::Hmc,
        Self::Nuts,
        Self::Slice,
        Self::Emcee,
        Self::Mix,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RwmGauss => "rwm_gauss",
            Self::RwmCauchy => "rwm_cauchy",
            Self::RwmLaplace => "rwm_laplace",
            Self::Hmc => "hmc",
            Self::Nuts => "nuts",
            Self::Slice => "slice",
            Self::Emcee => "emcee",
            Self::Mix => "mix",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = SamplerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SamplerError::InvalidSpec(format!("unknown sampler kind {s:?}")))
    }
}

/// A sampler and its tuning overrides. Unset fields take the defaults
/// documented on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Identifier used in outputs; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Tune step sizes and scales during the adaptation window (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapt: Option<bool>,
    /// RWM acceptance target (0.234) or HMC/NUTS dual-averaging target (0.8).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_accept: Option<f64>,
    /// RWM initial proposal scale relative to the scale guess (2.38 / sqrt(D)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_scale: Option<f64>,
    /// HMC/NUTS initial step size relative to the scale guess. HMC defaults
    /// to 0.1; NUTS searches for one when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    /// HMC leapfrog steps per transition (32).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    /// Relative uniform jitter of the HMC step size (0.1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_jitter: Option<f64>,
    /// NUTS maximum tree depth (10).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    /// Slice bracket width relative to the scale guess (1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Slice step-out cap (50).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_out: Option<usize>,
    /// Emcee stretch parameter `a` (2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch: Option<f64>,
    /// Emcee walker count (max(2D, 10)).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walkers: Option<usize>,
    /// Probability of a NUTS transition in the mixture (0.1); RWM otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix_nuts_prob: Option<f64>,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            name: None,
            adapt: None,
            target_accept: None,
            proposal_scale: None,
            step_size: None,
            n_steps: None,
            step_jitter: None,
            max_depth: None,
            width: None,
            max_step_out: None,
            stretch: None,
            walkers: None,
            mix_nuts_prob: None,
        }
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.to_string())
    }

    pub fn adapt(&self) -> bool {
        self.adapt.unwrap_or(true)
    }

    pub fn walkers(&self, dim: usize) -> usize {
        self.walkers.unwrap_or((2 * dim).max(10))
    }

    /// Number of starting points the sampler needs.
    pub fn n_init_points(&self, dim: usize) -> usize {
        if self.kind == SamplerKind::Emcee {
            self.walkers(dim)
        } else {
            1
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::InvalidSpec(m));
        if let Some(t) = self.target_accept {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("target_accept {t} must lie in (0, 1)"));
            }
        }
        if let Some(s) = self.proposal_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("proposal_scale {s} must be finite and >= 0"));
            }
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("step_size {s} must be finite and > 0"));
            }
        }
        if self.n_steps == Some(0) {
            return bad("n_steps must be >= 1".into());
        }
        if let Some(j) = self.step_jitter {
            if !(0.0..1.0).contains(&j) {
                return bad(format!("step_jitter {j} must lie in [0, 1)"));
            }
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1".into());
        }
        if let Some(w) = self.width {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("width {w} must be finite and > 0"));
            }
        }
        if self.max_step_out == Some(0) {
            return bad("max_step_out must be >= 1".into());
        }
        if let Some(a) = self.stretch {
            if !(a >= 1.0 && a.is_finite()) {
                return bad(format!("stretch {a} must be finite and >= 1"));
            }
        }
        if self.kind == SamplerKind::Emcee {
            let w = self.walkers(dim);
            if w < dim + 2 || w < 4 {
                return bad(format!("emcee needs at least max(D + 2, 4) walkers, got {w}"));
            }
        }
        if let Some(p) = self.mix_nuts_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("mix_nuts_prob {p} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    fn family(&self) -> Option<ProposalFamily> {
        match self.kind {
            SamplerKind::RwmGauss => Some(ProposalFamily::Gauss),
            SamplerKind::RwmCauchy => Some(ProposalFamily::Cauchy),
            SamplerKind::RwmLaplace => Some(ProposalFamily::Laplace),
            _ => None,
        }
    }

    fn rwm(&self, family: ProposalFamily, scale_guess: &[f64]) -> Rwm {
        let dim = scale_guess.len();
        let rel = self.proposal_scale.unwrap_or(2.38 / (dim as f64).sqrt());
        let scale = scale_guess.iter().map(|s| s * rel).collect();
        Rwm::new(family, scale, self.target_accept.unwrap_or(0.234), self.adapt())
    }

    fn nuts(&self, scale_guess: &[f64]) -> Nuts {
        Nuts::new(
            scale_guess.to_vec(),
            self.step_size,
            self.max_depth.unwrap_or(10),
            self.target_accept.unwrap_or(0.8),
            self.adapt(),
        )
    }

    /// Builds the single-chain kernel for this spec. Not for emcee.
    pub fn build_kernel(&self, scale_guess: &[f64]) -> Result<KernelImpl, SamplerError> {
        self.validate(scale_guess.len())?;
        if let Some(f) = self.family() {
            return Ok(KernelImpl::Rwm(self.rwm(f, scale_guess)));
        }
        Ok(match self.kind {
            SamplerKind::Hmc => KernelImpl::Hmc(Hmc::new(
                scale_guess.to_vec(),
                self.step_size.unwrap_or(0.1),
                self.n_steps.unwrap_or(32),
                self.step_jitter.unwrap_or(0.1),
                self.target_accept.unwrap_or(0.8),
                self.adapt(),
            )),
            SamplerKind::Nuts => KernelImpl::Nuts(self.nuts(scale_guess)),
            SamplerKind::Slice => KernelImpl::Slice(Slice::new(
                scale_guess.iter().map(|s| s * self.width.unwrap_or(1.0)).collect(),
                self.max_step_out.unwrap_or(50),
            )),
            SamplerKind::Mix => {
                let p = self.mix_nuts_prob.unwrap_or(0.1);
                // The target_accept override would be ambiguous across the two
                // components, so each keeps its own default.
                let mut nuts_spec = self.clone();
                nuts_spec.target_accept = None;
                let rwm = nuts_spec.rwm(ProposalFamily::Gauss, scale_guess);
                KernelImpl::Mix(Mix::new(vec![
                    (p, KernelImpl::Nuts(nuts_spec.nuts(scale_guess))),
                    (1.0 - p, KernelImpl::Rwm(rwm)),
                ])?)
            }
            SamplerKind::Emcee => {
                return Err(SamplerError::InvalidSpec("emcee is an ensemble sampler, not a kernel".into()))
            }
            _ => unreachable!("random-walk kinds handled above"),
        })
    }
}
