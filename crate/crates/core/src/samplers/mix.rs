use rand::Rng as _;

use super::{Kernel, KernelImpl, Position, SamplerError, StepStats};
use crate::density::LogDensity;
use crate::rng::Rng;

/// Compound kernel: each transition applies one component, chosen at random
/// by weight. Components keep their own adaptation state.
pub struct Mix {
    components: Vec<(f64, KernelImpl)>,
    cumulative: Vec<f64>,
}

impl Mix {
    pub fn new(components: Vec<(f64, KernelImpl)>) -> Result<Self, SamplerError> {
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.is_empty() || components.iter().any(|c| !(c.0 >= 0.0)) || !(total > 0.0) {
            return Err(SamplerError::InvalidSpec("mixture weights must be >= 0 with a positive sum".into()));
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|c| {
                acc += c.0 / total;
                acc
            })
            .collect();
        Ok(Self { components, cumulative })
    }

    /// Component index for this transition. No uniform is drawn when only
    /// one component has positive weight.
    fn choose(&self, rng: &mut Rng) -> usize {
        let mut live = self.components.iter().enumerate().filter(|(_, c)| c.0 > 0.0);
        let first = live.next().map(|(i, _)| i).unwrap_or(0);
        if live.next().is_none() {
            return first;
        }
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1)
    }
}

impl Kernel for Mix {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        let i = self.choose(rng);
        let mut stats = self.components[i].1.transition(pos, view, rng)?;
        stats.component = Some(i);
        Ok(stats)
    }

    fn freeze(&mut self) {
        for c in &mut self.components {
            c.1.freeze();
        }
    }

    fn needs_grad(&self) -> bool {
        self.components.iter().any(|c| c.0 > 0.0 && c.1.needs_grad())
    }

    fn tuning(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.1.tuning()).collect()
    }
}
