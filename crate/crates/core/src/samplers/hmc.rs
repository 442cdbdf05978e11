use rand::Rng as _;

use super::{accept_probability, mh_accept, standard_normal, Kernel, Position, SamplerError, StepStats};
use crate::density::LogDensity;
use crate::rng::Rng;

/// Energy error beyond which a trajectory counts as divergent.
pub(crate) const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogOutput {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
    /// The position or density became non-finite; the trajectory stopped.
    pub divergent: bool,
}

/// `n_steps` leapfrog steps of size `eps` under the diagonal inverse mass
/// matrix `inv_mass`, starting from `(x, p)` with log-density `logp` and
/// gradient `grad` at `x`. Each step costs one gradient evaluation.
#[allow(clippy::too_many_arguments)]
pub fn leapfrog(
    view: &dyn LogDensity,
    x: &[f64],
    p: &[f64],
    logp: f64,
    grad: &[f64],
    eps: f64,
    n_steps: usize,
    inv_mass: &[f64],
) -> Result<LeapfrogOutput, SamplerError> {
    let mut out = LeapfrogOutput {
        x: x.to_vec(),
        p: p.to_vec(),
        logp,
        grad: grad.to_vec(),
        divergent: false,
    };
    for _ in 0..n_steps {
        for (pi, g) in out.p.iter_mut().zip(&out.grad) {
            *pi += 0.5 * eps * g;
        }
        for ((xi, pi), m) in out.x.iter_mut().zip(&out.p).zip(inv_mass) {
            *xi += eps * m * pi;
        }
        if out.x.iter().chain(&out.p).any(|v| !v.is_finite()) {
            out.divergent = true;
            return Ok(out);
        }
        let (lp, g) = view.grad_log_density(&out.x)?;
        out.logp = lp;
        out.grad = g;
        if !lp.is_finite() || out.grad.iter().any(|v| !v.is_finite()) {
            out.divergent = true;
            return Ok(out);
        }
        for (pi, g) in out.p.iter_mut().zip(&out.grad) {
            *pi += 0.5 * eps * g;
        }
    }
    Ok(out)
}

pub(crate) fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
}

/// Momentum draw `p ~ N(0, M)` with `M = diag(1 / inv_mass)`.
pub(crate) fn draw_momentum(inv_mass: &[f64], rng: &mut Rng) -> Vec<f64> {
    inv_mass.iter().map(|m| standard_normal(rng) / m.sqrt()).collect()
}

/// Nesterov dual averaging of `log eps` toward a target mean acceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    t: u64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            target,
            log_eps: eps0.ln(),
            log_eps_bar: eps0.ln(),
            h_bar: 0.0,
            t: 0,
        }
    }

    /// Feeds one acceptance statistic; returns the next step size to use.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.t += 1;
        let t = self.t as f64;
        let eta = 1.0 / (t + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat);
        self.log_eps = self.mu - t.sqrt() / Self::GAMMA * self.h_bar;
        let w = t.powf(-Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
        self.log_eps.exp()
    }

    /// Averaged step size, used once adaptation ends.
    pub fn final_step_size(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Doubles or halves a unit step size until a single leapfrog step's
/// acceptance probability crosses 1/2.
pub(crate) fn find_reasonable_step_size(
    view: &dyn LogDensity,
    pos: &Position,
    inv_mass: &[f64],
    rng: &mut Rng,
) -> Result<f64, SamplerError> {
    let grad = pos.grad.as_ref().expect("gradient cached before the step-size search");
    let p = draw_momentum(inv_mass, rng);
    let h0 = -pos.logp + kinetic(&p, inv_mass);
    let log_accept = |eps: f64| -> Result<f64, SamplerError> {
        let out = leapfrog(view, &pos.x, &p, pos.logp, grad, eps, 1, inv_mass)?;
        let h1 = -out.logp + kinetic(&out.p, inv_mass);
        Ok(if out.divergent || !h1.is_finite() { f64::NEG_INFINITY } else { h0 - h1 })
    };
    let half = 0.5f64.ln();
    let mut eps = 1.0;
    let up = log_accept(eps)? > half;
    for _ in 0..50 {
        let next = if up { eps * 2.0 } else { eps * 0.5 };
        let ok = log_accept(next)? > half;
        if up && !ok {
            break;
        }
        eps = next;
        if !up && ok {
            break;
        }
    }
    Ok(eps)
}

/// Static-trajectory HMC with a diagonal mass matrix set from the scale
/// guess. The step size is jittered uniformly by `±jitter` every
/// transition to avoid periodic trajectories.
#[derive(Debug, Clone)]
pub struct Hmc {
    inv_mass: Vec<f64>,
    eps: f64,
    n_steps: usize,
    jitter: f64,
    adaptation: Option<DualAveraging>,
}

impl Hmc {
    pub fn new(scale_guess: Vec<f64>, eps: f64, n_steps: usize, jitter: f64, target: f64, adapt: bool) -> Self {
        Self {
            inv_mass: scale_guess.iter().map(|s| s * s).collect(),
            eps,
            n_steps,
            jitter,
            adaptation: adapt.then(|| DualAveraging::new(eps, target)),
        }
    }

    pub fn step_size(&self) -> f64 {
        self.eps
    }
}

impl Kernel for Hmc {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        pos.ensure_grad(view)?;
        let p = draw_momentum(&self.inv_mass, rng);
        let eps = if self.jitter > 0.0 {
            self.eps * (1.0 + self.jitter * (2.0 * rng.random::<f64>() - 1.0))
        } else {
            self.eps
        };
        let grad = pos.grad.as_ref().expect("ensured above");
        let out = leapfrog(view, &pos.x, &p, pos.logp, grad, eps, self.n_steps, &self.inv_mass)?;
        let h0 = -pos.logp + kinetic(&p, &self.inv_mass);
        let h1 = -out.logp + kinetic(&out.p, &self.inv_mass);
        let divergent = out.divergent || !h1.is_finite() || h1 - h0 > DIVERGENCE_THRESHOLD;
        let log_ratio = if divergent { f64::NEG_INFINITY } else { h0 - h1 };
        let accepted = mh_accept(log_ratio, rng);
        if accepted {
            pos.x = out.x;
            pos.logp = out.logp;
            pos.grad = Some(out.grad);
        }
        let alpha = accept_probability(log_ratio);
        if let Some(da) = &mut self.adaptation {
            self.eps = da.update(alpha);
        }
        Ok(StepStats {
            accept_stat: alpha,
            accepted,
            divergent,
            leapfrog_steps: self.n_steps,
            ..Default::default()
        })
    }

    fn freeze(&mut self) {
        if let Some(da) = self.adaptation.take() {
            if da.t > 0 {
                self.eps = da.final_step_size();
            }
        }
    }

    fn needs_grad(&self) -> bool {
        true
    }

    fn tuning(&self) -> Vec<f64> {
        vec![self.eps]
    }
}
