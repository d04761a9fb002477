//! Random variates and log densities shared by the prior, generator and sampler.
//!
//! Gamma draws are produced in log space so that shapes far below one (the
//! regime of per-node base-measure weights) never underflow to exactly zero.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use statrs::function::gamma::ln_gamma;

/// Smallest weight the sampler keeps; products of two such weights still
/// evaluate to a (sub)normal number rather than an exact zero.
pub const MIN_WEIGHT: f64 = 1e-150;

/// Rates below this are treated as underflow by the truncated Poisson.
pub const MIN_RATE: f64 = 1e-300;

/// `ln X` for `X ~ Gamma(shape, 1)`.
pub fn ln_gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && shape.is_finite());
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).unwrap().sample(rng);
        g.max(f64::MIN_POSITIVE).ln()
    } else {
        // Gamma(a) = Gamma(a + 1) * U^(1/a)
        let g: f64 = Gamma::new(shape + 1.0, 1.0).unwrap().sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.max(f64::MIN_POSITIVE).ln() + u.ln() / shape
    }
}

/// `Gamma(shape, 1)` draw floored at [`MIN_WEIGHT`].
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    ln_gamma_sample(shape, rng).exp().max(MIN_WEIGHT)
}

/// Dirichlet draw. Zero concentrations yield exact zeros in that slot; at
/// least one concentration must be positive.
pub fn dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = concentration
        .iter()
        .map(|&a| {
            if a > 0.0 {
                ln_gamma_sample(a, rng)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max.is_finite(), "dirichlet needs a positive concentration");
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let la = ln_gamma_sample(a, rng);
    let lb = ln_gamma_sample(b, rng);
    let m = la.max(lb);
    let (ea, eb) = ((la - m).exp(), (lb - m).exp());
    ea / (ea + eb)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Index drawn proportionally to non-negative `weights`.
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "categorical weights sum to zero");
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
            if u < w {
                return k;
            }
            u -= w;
        }
    }
    last_positive
}

pub fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(rate).unwrap().sample(rng);
    x as u64
}

/// Raised when a truncated-Poisson rate is too small to sample from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateUnderflow(pub f64);

/// Poisson conditioned on a strictly positive outcome.
///
/// Small rates use sequential inversion from `k = 1`; larger rates reject
/// zeros from an ordinary Poisson draw (acceptance at least `1 - 1/e`).
pub fn truncated_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64, RateUnderflow> {
    if !(rate > MIN_RATE) || !rate.is_finite() {
        return Err(RateUnderflow(rate));
    }
    if rate < 1.0 {
        let u: f64 = rng.random();
        let mut p = rate * (-rate).exp() / -(-rate).exp_m1();
        let mut cdf = p;
        let mut k = 1u64;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= rate / k as f64;
            cdf += p;
        }
        Ok(k)
    } else {
        loop {
            let x = poisson(rate, rng);
            if x > 0 {
                return Ok(x);
            }
        }
    }
}

/// `E[X | X > 0]` for `X ~ Poisson(rate)`.
pub fn truncated_poisson_mean(rate: f64) -> f64 {
    rate / -(-rate).exp_m1()
}

pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

pub fn ln_poisson_pmf(k: u64, rate: f64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * rate.ln() - rate - ln_factorial(k)
}

/// Log density of `Gamma(shape, 1)` at `x`.
pub fn ln_gamma_pdf(x: f64, shape: f64) -> f64 {
    (shape - 1.0) * x.ln() - x - ln_gamma(shape)
}

/// Log density of a Dirichlet on the simplex coordinates `x`.
pub fn ln_dirichlet_pdf(x: &[f64], concentration: &[f64]) -> f64 {
    let total: f64 = concentration.iter().sum();
    let mut out = ln_gamma(total);
    for (&xi, &a) in x.iter().zip(concentration) {
        out += (a - 1.0) * xi.ln() - ln_gamma(a);
    }
    out
}
