use std::f64::consts::PI;

use rand::Rng as _;

use super::{accept_probability, mh_accept, standard_normal, Kernel, Position, SamplerError, StepStats};
use crate::density::LogDensity;
use crate::rng::Rng;

/// Distribution of the per-coordinate random-walk increment before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalFamily {
    Gauss,
    Cauchy,
    /// Unit-scale Laplace.
    Laplace,
}

impl ProposalFamily {
    pub fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            Self::Gauss => standard_normal(rng),
            Self::Cauchy => (PI * (rng.random::<f64>() - 0.5)).tan(),
            Self::Laplace => {
                let u = rng.random::<f64>() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    /// Log-density of an unscaled increment.
    pub fn log_density(self, z: f64) -> f64 {
        match self {
            Self::Gauss => -0.5 * z * z - 0.5 * (2.0 * PI).ln(),
            Self::Cauchy => -(PI * (1.0 + z * z)).ln(),
            Self::Laplace => -z.abs() - 2f64.ln(),
        }
    }
}

/// Random-walk Metropolis with a diagonal proposal scale.
///
/// While adapting, every per-dimension scale is multiplied by
/// `exp((alpha - target) / ceil(t / 50))` after transition `t`, where
/// `alpha` is the acceptance probability of that transition.
#[derive(Debug, Clone)]
pub struct Rwm {
    family: ProposalFamily,
    scale: Vec<f64>,
    target: f64,
    adapting: bool,
    t: u64,
}

impl Rwm {
    pub fn new(family: ProposalFamily, scale: Vec<f64>, target: f64, adapt: bool) -> Self {
        Self {
            family,
            scale,
            target,
            adapting: adapt,
            t: 0,
        }
    }

    pub fn family(&self) -> ProposalFamily {
        self.family
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Log proposal density of moving by `delta`.
    pub fn log_proposal_density(&self, delta: &[f64]) -> f64 {
        delta
            .iter()
            .zip(&self.scale)
            .map(|(d, s)| self.family.log_density(d / s) - s.ln())
            .sum()
    }

    /// Robbins-Monro update of the log-scales from one acceptance probability.
    pub fn adapt(&mut self, alpha: f64) {
        self.t += 1;
        let gain = 1.0 / (self.t as f64 / 50.0).ceil();
        let factor = ((alpha - self.target) * gain).exp();
        for s in &mut self.scale {
            *s *= factor;
        }
    }
}

impl Kernel for Rwm {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        let proposal: Vec<f64> = pos
            .x
            .iter()
            .zip(&self.scale)
            .map(|(x, s)| x + s * self.family.draw(rng))
            .collect();
        let log_ratio = if proposal.iter().all(|v| v.is_finite()) {
            let lp = view.log_density(&proposal)?;
            if lp.is_finite() {
                Some((lp, lp - pos.logp))
            } else {
                None
            }
        } else {
            None
        };
        let ratio = log_ratio.map_or(f64::NEG_INFINITY, |r| r.1);
        let accepted = mh_accept(ratio, rng);
        if accepted {
            if let Some((lp, _)) = log_ratio {
                pos.x = proposal;
                pos.logp = lp;
                pos.grad = None;
            }
        }
        let alpha = accept_probability(ratio);
        if self.adapting {
            self.adapt(alpha);
        }
        Ok(StepStats {
            accept_stat: alpha,
            accepted,
            ..Default::default()
        })
    }

    fn freeze(&mut self) {
        self.adapting = false;
    }

    fn needs_grad(&self) -> bool {
        false
    }

    fn tuning(&self) -> Vec<f64> {
        self.scale.clone()
    }
}
