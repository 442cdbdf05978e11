use rand::Rng as _;

use super::hmc::{draw_momentum, find_reasonable_step_size, kinetic, leapfrog, DIVERGENCE_THRESHOLD};
use super::{DualAveraging, Kernel, Position, SamplerError, StepStats};
use crate::density::LogDensity;
use crate::rng::Rng;

#[derive(Debug, Clone)]
struct State {
    x: Vec<f64>,
    p: Vec<f64>,
    logp: f64,
    grad: Vec<f64>,
}

/// A contiguous piece of trajectory. `left` and `right` are its earliest
/// and latest states in integration time.
#[derive(Debug, Clone)]
struct Subtree {
    left: State,
    right: State,
    sample: State,
    /// `log sum exp(H0 - H)` over the states.
    log_w: f64,
    /// Sum of momenta.
    rho: Vec<f64>,
    n_leapfrog: usize,
    sum_accept: f64,
    divergent: bool,
    turning: bool,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// No-U-Turn sampler with multinomial trajectory sampling and the
/// generalized (momentum-sum) termination criterion.
///
/// Trees are extended by doubling in a random direction. The new subtree's
/// sample replaces the current one with probability `min(1, w_new / w_old)`
/// at the top level and proportionally to weight inside subtrees. The
/// initial step size comes from the spec or from a doubling search on the
/// first transition; dual averaging tunes it until [`Kernel::freeze`].
#[derive(Debug, Clone)]
pub struct Nuts {
    inv_mass: Vec<f64>,
    eps: Option<f64>,
    max_depth: usize,
    target: f64,
    adapting: bool,
    adaptation: Option<DualAveraging>,
}

impl Nuts {
    pub fn new(scale_guess: Vec<f64>, step_size: Option<f64>, max_depth: usize, target: f64, adapt: bool) -> Self {
        Self {
            inv_mass: scale_guess.iter().map(|s| s * s).collect(),
            eps: step_size,
            max_depth,
            target,
            adapting: adapt,
            adaptation: None,
        }
    }

    pub fn step_size(&self) -> Option<f64> {
        self.eps
    }

    fn p_sharp_dot(&self, p: &[f64], rho: &[f64]) -> f64 {
        p.iter().zip(&self.inv_mass).zip(rho).map(|((p, m), r)| p * m * r).sum()
    }

    /// True when the trajectory between states with momenta `pa` and `pb`
    /// and momentum sum `rho` has started to turn back.
    fn uturn(&self, rho: &[f64], pa: &[f64], pb: &[f64]) -> bool {
        !(self.p_sharp_dot(pa, rho) > 0.0 && self.p_sharp_dot(pb, rho) > 0.0)
    }

    /// Joins adjacent subtrees (`new` continues `old` in direction `dir`)
    /// and applies the termination checks across the seam. The sample and
    /// weight of the result are left to the caller.
    fn merge(&self, old: Subtree, new: Subtree, dir: f64, sample: State, log_w: f64) -> Subtree {
        let (l, r) = if dir > 0.0 { (old, new) } else { (new, old) };
        let rho: Vec<f64> = l.rho.iter().zip(&r.rho).map(|(a, b)| a + b).collect();
        let seam_l: Vec<f64> = l.rho.iter().zip(&r.left.p).map(|(a, b)| a + b).collect();
        let seam_r: Vec<f64> = r.rho.iter().zip(&l.right.p).map(|(a, b)| a + b).collect();
        let turning = self.uturn(&rho, &l.left.p, &r.right.p)
            || self.uturn(&seam_l, &l.left.p, &r.left.p)
            || self.uturn(&seam_r, &l.right.p, &r.right.p);
        Subtree {
            n_leapfrog: l.n_leapfrog + r.n_leapfrog,
            sum_accept: l.sum_accept + r.sum_accept,
            left: l.left,
            right: r.right,
            sample,
            log_w,
            rho,
            divergent: false,
            turning,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &self,
        view: &dyn LogDensity,
        edge: &State,
        dir: f64,
        depth: usize,
        eps: f64,
        h0: f64,
        rng: &mut Rng,
    ) -> Result<Subtree, SamplerError> {
        if depth == 0 {
            let out = leapfrog(view, &edge.x, &edge.p, edge.logp, &edge.grad, dir * eps, 1, &self.inv_mass)?;
            let h = -out.logp + kinetic(&out.p, &self.inv_mass);
            let divergent = out.divergent || !h.is_finite() || h - h0 > DIVERGENCE_THRESHOLD;
            let log_w = if divergent { f64::NEG_INFINITY } else { h0 - h };
            let state = State {
                x: out.x,
                p: out.p,
                logp: out.logp,
                grad: out.grad,
            };
            return Ok(Subtree {
                left: state.clone(),
                right: state.clone(),
                rho: state.p.clone(),
                sample: state,
                log_w,
                n_leapfrog: 1,
                sum_accept: log_w.min(0.0).exp(),
                divergent,
                turning: false,
            });
        }
        let inner = self.build(view, edge, dir, depth - 1, eps, h0, rng)?;
        if inner.divergent || inner.turning {
            return Ok(inner);
        }
        let far = if dir > 0.0 { &inner.right } else { &inner.left };
        let outer = self.build(view, far, dir, depth - 1, eps, h0, rng)?;
        if outer.divergent || outer.turning {
            let mut failed = inner;
            failed.n_leapfrog += outer.n_leapfrog;
            failed.sum_accept += outer.sum_accept;
            failed.divergent = outer.divergent;
            failed.turning = outer.turning;
            return Ok(failed);
        }
        let log_w = log_add_exp(inner.log_w, outer.log_w);
        let take_outer = rng.random::<f64>().ln() < outer.log_w - log_w;
        let sample = if take_outer { outer.sample.clone() } else { inner.sample.clone() };
        Ok(self.merge(inner, outer, dir, sample, log_w))
    }
}

impl Kernel for Nuts {
    fn transition(&mut self, pos: &mut Position, view: &dyn LogDensity, rng: &mut Rng) -> Result<StepStats, SamplerError> {
        pos.ensure_grad(view)?;
        let eps = match self.eps {
            Some(e) => e,
            None => {
                let e = find_reasonable_step_size(view, pos, &self.inv_mass, rng)?;
                self.eps = Some(e);
                e
            }
        };
        if self.adapting && self.adaptation.is_none() {
            self.adaptation = Some(DualAveraging::new(eps, self.target));
        }
        let p0 = draw_momentum(&self.inv_mass, rng);
        let h0 = -pos.logp + kinetic(&p0, &self.inv_mass);
        let z0 = State {
            x: pos.x.clone(),
            p: p0.clone(),
            logp: pos.logp,
            grad: pos.grad.clone().expect("ensured above"),
        };
        let mut tree = Subtree {
            left: z0.clone(),
            right: z0.clone(),
            sample: z0,
            log_w: 0.0,
            rho: p0,
            n_leapfrog: 0,
            sum_accept: 0.0,
            divergent: false,
            turning: false,
        };
        let mut moved = false;
        let mut divergent = false;
        for depth in 0..self.max_depth {
            let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let edge = if dir > 0.0 { &tree.right } else { &tree.left };
            let sub = self.build(view, edge, dir, depth, eps, h0, rng)?;
            if sub.divergent || sub.turning {
                tree.n_leapfrog += sub.n_leapfrog;
                tree.sum_accept += sub.sum_accept;
                divergent = sub.divergent;
                break;
            }
            let take_new = rng.random::<f64>().ln() < sub.log_w - tree.log_w;
            let sample = if take_new {
                moved = true;
                sub.sample.clone()
            } else {
                tree.sample.clone()
            };
            let log_w = log_add_exp(tree.log_w, sub.log_w);
            tree = self.merge(tree, sub, dir, sample, log_w);
            if tree.turning {
                break;
            }
        }
        if moved {
            let s = tree.sample;
            pos.x = s.x;
            pos.logp = s.logp;
            pos.grad = Some(s.grad);
        }
        let accept_stat = if tree.n_leapfrog > 0 {
            tree.sum_accept / tree.n_leapfrog as f64
        } else {
            0.0
        };
        if self.adapting {
            if let Some(da) = &mut self.adaptation {
                self.eps = Some(da.update(accept_stat));
            }
        }
        Ok(StepStats {
            accept_stat,
            accepted: moved,
            divergent,
            leapfrog_steps: tree.n_leapfrog,
            ..Default::default()
        })
    }

    fn freeze(&mut self) {
        self.adapting = false;
        if let Some(da) = self.adaptation.take() {
            self.eps = Some(da.final_step_size());
        }
    }

    fn needs_grad(&self) -> bool {
        true
    }

    fn tuning(&self) -> Vec<f64> {
        vec![self.eps.unwrap_or(f64::NAN)]
    }
}
