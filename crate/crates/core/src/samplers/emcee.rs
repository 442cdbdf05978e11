use rand::Rng as _;

use super::{accept_probability, mh_accept, SamplerError, SamplerSpec, StepStats};
use crate::density::LogDensity;
use crate::rng::Rng;

/// Walkers closer than this in every coordinate count as collapsed.
const COLLAPSE_TOL: f64 = 1e-12;

/// Affine-invariant ensemble sampler with the stretch move and a red-black
/// split: each half is updated against the other half's current positions.
#[derive(Debug, Clone)]
pub struct Emcee {
    walkers: Vec<Vec<f64>>,
    logp: Vec<f64>,
    a: f64,
}

impl Emcee {
    /// Starts the ensemble at `points`; one log-density call per walker.
    pub fn new(spec: &SamplerSpec, view: &dyn LogDensity, points: &[Vec<f64>]) -> Result<Self, SamplerError> {
        let n = spec.walkers(view.dim());
        if points.len() < n {
            return Err(SamplerError::InvalidSpec(format!("emcee needs {n} starting points, got {}", points.len())));
        }
        let walkers: Vec<Vec<f64>> = points[..n].to_vec();
        let mut logp = Vec::with_capacity(n);
        for w in &walkers {
            let lp = view.log_density(w)?;
            if !lp.is_finite() {
                return Err(SamplerError::BadInitialPoint(lp));
            }
            logp.push(lp);
        }
        Ok(Self {
            walkers,
            logp,
            a: spec.stretch.unwrap_or(2.0),
        })
    }

    pub fn walkers(&self) -> &[Vec<f64>] {
        &self.walkers
    }

    pub fn stretch(&self) -> f64 {
        self.a
    }

    /// Draw from `g(z) ∝ 1/sqrt(z)` on `[1/a, a]`.
    fn draw_z(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        ((self.a - 1.0) * u + 1.0).powi(2) / self.a
    }

    /// One sweep: both halves updated once. Mean acceptance probability is
    /// reported as the accept statistic.
    pub fn sweep(&mut self, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        let n = self.walkers.len();
        let half = n / 2;
        let dim = view.dim();
        let mut accept_sum = 0.0;
        let mut any = false;
        for (range, other) in [(0..half, half..n), (half..n, 0..half)] {
            for k in range {
                let j = rng.random_range(other.clone());
                let z = self.draw_z(rng);
                let (xk, xj) = (&self.walkers[k], &self.walkers[j]);
                // written relative to x_k so that z = 1 reproduces x_k exactly
                let y: Vec<f64> = xk.iter().zip(xj).map(|(a, b)| a + (z - 1.0) * (a - b)).collect();
                let ratio = if y.iter().all(|v| v.is_finite()) {
                    let lp = view.log_density(&y)?;
                    Some(lp).filter(|v| v.is_finite())
                } else {
                    None
                };
                let log_ratio = ratio.map_or(f64::NEG_INFINITY, |lp| (dim as f64 - 1.0) * z.ln() + lp - self.logp[k]);
                accept_sum += accept_probability(log_ratio);
                if mh_accept(log_ratio, rng) {
                    if let Some(lp) = ratio {
                        self.walkers[k] = y;
                        self.logp[k] = lp;
                        any = true;
                    }
                }
            }
        }
        let first = &self.walkers[0];
        let collapsed = self
            .walkers
            .iter()
            .all(|w| w.iter().zip(first).all(|(a, b)| (a - b).abs() < COLLAPSE_TOL));
        if collapsed {
            return Err(SamplerError::WalkerCollapse { walkers: n });
        }
        Ok(StepStats {
            accept_stat: accept_sum / n as f64,
            accepted: any,
            ..Default::default()
        })
    }
}
