//! Leapfrog HMC with an identity mass matrix, and the collapsed target for
//! the base-measure weights.

use rand::Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::crm::BasePrior;
use crate::dist;

/// A differentiable log density. Infeasible points return `-inf`.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn ln_density(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcOutcome {
    pub accepted: bool,
    /// `min(1, exp(-ΔH))`, zero for diverging or infeasible trajectories.
    pub accept_prob: f64,
}

/// One HMC transition from `x` (updated in place on acceptance). The step
/// size is jittered uniformly within ±20% per trajectory.
pub fn hmc_transition<T, R>(
    target: &T,
    x: &mut Vec<f64>,
    step: f64,
    leapfrog: usize,
    rng: &mut R,
) -> HmcOutcome
where
    T: LogDensity,
    R: Rng + ?Sized,
{
    let d = target.dim();
    let eps = step * rng.random_range(0.8..1.2);
    let lp0 = target.ln_density(x);
    let mut p: Vec<f64> = (0..d).map(|_| dist::standard_normal(rng)).collect();
    let h0 = -lp0 + 0.5 * p.iter().map(|v| v * v).sum::<f64>();

    let mut q = x.clone();
    let mut g = vec![0.0; d];
    target.gradient(&q, &mut g);
    for _ in 0..leapfrog {
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * eps * gi;
        }
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += eps * pi;
        }
        if !target.ln_density(&q).is_finite() {
            return HmcOutcome {
                accepted: false,
                accept_prob: 0.0,
            };
        }
        target.gradient(&q, &mut g);
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * eps * gi;
        }
    }
    let lp1 = target.ln_density(&q);
    let h1 = -lp1 + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let log_ratio = h0 - h1;
    let accept_prob = if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    };
    let accepted = rng.random::<f64>() < accept_prob;
    if accepted {
        *x = q;
    }
    HmcOutcome {
        accepted,
        accept_prob,
    }
}

/// Log weights below this are treated as infeasible (their exponential
/// would flush to zero).
pub const MIN_LOG_WEIGHT: f64 = -700.0;

/// Log posterior of `x = log w_0` over all `|V| + 1` slots with every cluster
/// row's normalized weights integrated out:
///
/// `ln p(w_0) + Σ x + Σ_k [(w̄_0 - 1) ln w̄_k - lnΓ(w̄_0 + 2 n_k)]
///  + Σ_k Σ_i [lnΓ(w_{0,i} + n_{k,i}) - lnΓ(w_{0,i})] - π_0 w̄_0²`.
///
/// The first bracket collects the `Gamma(w̄_0)` prior on each cluster total
/// and the Dirichlet-multinomial normalizer.
#[derive(Debug, Clone)]
pub struct W0Target {
    pub prior: BasePrior,
    pub kappa_mass: f64,
    /// Per cluster `k ≥ 1`: non-zero `(slot, n_{k,slot})` incidence counts.
    pub counts: Vec<Vec<(usize, u64)>>,
    /// Per cluster `k ≥ 1`: number of edge copies `n_k`.
    pub copies: Vec<u64>,
    /// Per cluster `k ≥ 1`: `ln w̄_k`.
    pub ln_totals: Vec<f64>,
    /// Remainder weight whose rate term uses the base measure directly.
    pub pi0: f64,
    pub dim: usize,
}

impl LogDensity for W0Target {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&v| !(v > MIN_LOG_WEIGHT) || !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let w: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let total: f64 = w.iter().sum();
        let mut lp = self.prior.ln_density(&w, self.kappa_mass) + x.iter().sum::<f64>();
        for k in 0..self.counts.len() {
            lp += (total - 1.0) * self.ln_totals[k] - ln_gamma(total + 2.0 * self.copies[k] as f64);
            for &(i, n) in &self.counts[k] {
                lp += ln_gamma(w[i] + n as f64) - ln_gamma(w[i]);
            }
        }
        lp - self.pi0 * total * total
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let w: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let total: f64 = w.iter().sum();
        self.prior.log_coord_gradient(&w, self.kappa_mass, out);
        // d/dw̄_0, shared by every slot through the total
        let mut shared = -2.0 * self.pi0 * total;
        for k in 0..self.counts.len() {
            shared += self.ln_totals[k] - digamma(total + 2.0 * self.copies[k] as f64);
        }
        for (o, &wi) in out.iter_mut().zip(&w) {
            *o += 1.0 + wi * shared;
        }
        for counts in &self.counts {
            for &(i, n) in counts {
                out[i] += w[i] * (digamma(w[i] + n as f64) - digamma(w[i]));
            }
        }
    }
}
