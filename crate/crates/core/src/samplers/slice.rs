use rand::Rng as _;

use super::{Kernel, Position, SamplerError, StepStats};
use crate::density::LogDensity;
use crate::rng::Rng;

/// Bracket width below which shrinkage gives up on a coordinate.
const MIN_BRACKET: f64 = 1e-12;

/// Coordinate-wise slice sampling with stepping out and shrinkage.
/// One transition updates every coordinate once, in order.
#[derive(Debug, Clone)]
pub struct Slice {
    width: Vec<f64>,
    max_step_out: usize,
}

impl Slice {
    pub fn new(width: Vec<f64>, max_step_out: usize) -> Self {
        Self { width, max_step_out }
    }

    fn log_density_at(view: &dyn LogDensity, x: &mut [f64], d: usize, v: f64) -> Result<f64, SamplerError> {
        let old = x[d];
        x[d] = v;
        let lp = view.log_density(x);
        x[d] = old;
        Ok(lp?)
    }

    /// Brackets the slice `{v : log p(x with x_d = v) > height}` around
    /// `x_d`, expanding by at most `max_step_out` widths in total.
    pub fn step_out(
        &self,
        view: &dyn LogDensity,
        x: &mut [f64],
        d: usize,
        height: f64,
        rng: &mut Rng,
    ) -> Result<(f64, f64), SamplerError> {
        let w = self.width[d];
        let mut lo = x[d] - w * rng.random::<f64>();
        let mut hi = lo + w;
        let m = self.max_step_out;
        let mut j = (m as f64 * rng.random::<f64>()).floor() as usize;
        let mut k = (m - 1).saturating_sub(j);
        while j > 0 && Self::log_density_at(view, x, d, lo)? > height {
            lo -= w;
            j -= 1;
        }
        while k > 0 && Self::log_density_at(view, x, d, hi)? > height {
            hi += w;
            k -= 1;
        }
        Ok((lo, hi))
    }

    /// Draws uniformly from the bracket, shrinking toward `x_d` on
    /// rejection. Returns `None` when the bracket collapses.
    pub fn shrink(
        view: &dyn LogDensity,
        x: &mut [f64],
        d: usize,
        height: f64,
        (mut lo, mut hi): (f64, f64),
        rng: &mut Rng,
    ) -> Result<Option<(f64, f64)>, SamplerError> {
        let x0 = x[d];
        loop {
            if hi - lo < MIN_BRACKET {
                return Ok(None);
            }
            let v = lo + (hi - lo) * rng.random::<f64>();
            let lp = Self::log_density_at(view, x, d, v)?;
            if lp > height {
                return Ok(Some((v, lp)));
            }
            if v < x0 {
                lo = v;
            } else {
                hi = v;
            }
        }
    }
}

impl Kernel for Slice {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        let mut stalled = false;
        let mut moved = false;
        for d in 0..pos.x.len() {
            let e: f64 = -(1.0 - rng.random::<f64>()).ln();
            let height = pos.logp - e;
            let bracket = self.step_out(view, &mut pos.x, d, height, rng)?;
            match Self::shrink(view, &mut pos.x, d, height, bracket, rng)? {
                Some((v, lp)) => {
                    pos.x[d] = v;
                    pos.logp = lp;
                    moved = true;
                }
                None => stalled = true,
            }
        }
        if moved {
            pos.grad = None;
        }
        Ok(StepStats {
            accept_stat: 1.0,
            accepted: moved,
            stalled,
            ..Default::default()
        })
    }

    fn freeze(&mut self) {}

    fn needs_grad(&self) -> bool {
        false
    }

    fn tuning(&self) -> Vec<f64> {
        self.width.clone()
    }
}
