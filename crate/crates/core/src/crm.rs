//! Priors of the mixture model: stick-breaking cluster weights and the
//! gamma-process sociabilities truncated to the observed nodes plus one
//! slack slot for all unobserved mass.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::dist::{self, MIN_WEIGHT};
use crate::error::{Error, Result};

/// Cluster weights `(π_0, π_1, .., π_K)`; `π_0` is the unassigned remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct GemWeights {
    pub pi: Vec<f64>,
    pub alpha: f64,
}

impl GemWeights {
    pub fn num_clusters(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn remainder(&self) -> f64 {
        self.pi[0]
    }
}

/// Stick-breaking from explicit breaks `g_1..g_K`:
/// `π_k = g_k Π_{l<k} (1 - g_l)`, remainder `Π_{l≤K} (1 - g_l)`.
pub fn gem_from_sticks(sticks: &[f64], alpha: f64) -> GemWeights {
    let mut pi = Vec::with_capacity(sticks.len() + 1);
    pi.push(0.0);
    let mut rest = 1.0;
    for &g in sticks {
        pi.push(g * rest);
        rest *= 1.0 - g;
    }
    pi[0] = rest;
    GemWeights { pi, alpha }
}

/// Truncated GEM draw with `g_k ~ Beta(1, alpha)`.
pub fn sample_gem<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> GemWeights {
    assert!(alpha > 0.0 && k >= 1);
    let sticks: Vec<f64> = (0..k).map(|_| dist::beta(1.0, alpha, rng)).collect();
    gem_from_sticks(&sticks, alpha)
}

/// Atom weights over `num_nodes + 1` slots; slot 0 is the slack.
#[derive(Debug, Clone, PartialEq)]
pub struct CrmWeights {
    w: Vec<f64>,
    total: f64,
}

impl CrmWeights {
    pub fn from_vec(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Domain("weights need at least the slack slot".into()));
        }
        if let Some(bad) = w.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("non-positive weight {bad}")));
        }
        let total = w.iter().sum();
        Ok(Self { w, total })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn slack(&self) -> f64 {
        self.w[0]
    }

    pub fn num_nodes(&self) -> usize {
        self.w.len() - 1
    }

    /// Weight of observed node `i` (0-based), i.e. slot `i + 1`.
    pub fn node(&self, i: usize) -> f64 {
        self.w[i + 1]
    }

    pub fn slot(&self, s: usize) -> f64 {
        self.w[s]
    }

    /// Sum over observed-node slots.
    pub fn observed_mass(&self) -> f64 {
        self.total - self.w[0]
    }

    /// Multiplies every slot so the total becomes `total`.
    pub fn rescale_to(&mut self, total: f64) {
        let c = total / self.total;
        self.w
            .iter_mut()
            .for_each(|v| *v = (*v * c).max(MIN_WEIGHT));
        self.total = self.w.iter().sum();
    }

    /// Replaces the entries; the total is recomputed.
    pub fn set_entries(&mut self, w: Vec<f64>) {
        debug_assert_eq!(w.len(), self.w.len());
        self.total = w.iter().sum();
        self.w = w;
    }

    /// Recomputes the stored total from the entries.
    pub fn refresh_total(&mut self) {
        self.total = self.w.iter().sum();
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.w.iter().map(|v| v / self.total).collect()
    }
}

/// Finite gamma-process draw: total mass `Gamma(kappa, 1)` times a symmetric
/// Dirichlet with concentration `kappa / (num_nodes + 1)` per slot.
pub fn sample_w0<R: Rng + ?Sized>(kappa_mass: f64, num_nodes: usize, rng: &mut R) -> CrmWeights {
    assert!(kappa_mass > 0.0);
    let total = dist::gamma_sample(kappa_mass, rng);
    let a = slot_concentration(kappa_mass, num_nodes);
    let shares = dist::dirichlet(&vec![a; num_nodes + 1], rng);
    let w = shares.iter().map(|s| (s * total).max(MIN_WEIGHT)).collect();
    CrmWeights::from_vec(w).expect("positive by construction")
}

/// Per-slot concentration `kappa / (num_nodes + 1)` of the finite truncation.
pub fn slot_concentration(kappa_mass: f64, num_nodes: usize) -> f64 {
    kappa_mass / (num_nodes as f64 + 1.0)
}

/// Cluster row given the base measure: `w_{k,i} ~ Gamma(w_{0,i}, 1)` in every slot.
pub fn sample_wk_prior<R: Rng + ?Sized>(w0: &CrmWeights, rng: &mut R) -> CrmWeights {
    let w = w0
        .as_slice()
        .iter()
        .map(|&shape| dist::gamma_sample(shape, rng))
        .collect();
    CrmWeights::from_vec(w).expect("positive by construction")
}

/// Log of the gamma-process Lévy density `s^{-1} e^{-s}`, unnormalized.
pub fn log_levy_density(w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("Lévy density needs w > 0, got {w}")));
    }
    Ok(-w.ln() - w)
}

/// Log density of the total mass, `Gamma(kappa_mass, 1)`, at `wbar`.
pub fn log_total_mass_density(wbar: f64, kappa_mass: f64) -> Result<f64> {
    if !(wbar > 0.0) {
        return Err(Error::Domain(format!(
            "total-mass density needs wbar > 0, got {wbar}"
        )));
    }
    Ok(dist::ln_gamma_pdf(wbar, kappa_mass))
}

/// Prior placed on the base-measure weights `w_0` for a fixed node set.
///
/// `Finite` is the exact law of [`sample_w0`] (independent `Gamma(a, 1)` per
/// slot). `Levy` is the atom-plus-remaining-mass form: Lévy density on each
/// observed node and the total-mass density on the slack. It is improper for
/// a fixed node set, so it is offered for inference only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasePrior {
    #[default]
    Finite,
    Levy,
}

impl std::str::FromStr for BasePrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite" => Ok(BasePrior::Finite),
            "levy" => Ok(BasePrior::Levy),
            other => Err(Error::Config(format!("unknown w0 prior `{other}`"))),
        }
    }
}

impl BasePrior {
    pub fn name(&self) -> &'static str {
        match self {
            BasePrior::Finite => "finite",
            BasePrior::Levy => "levy",
        }
    }

    /// Log prior density of `w0` (slot 0 is the slack).
    pub fn ln_density(&self, w0: &[f64], kappa_mass: f64) -> f64 {
        match self {
            BasePrior::Finite => {
                let a = slot_concentration(kappa_mass, w0.len() - 1);
                w0.iter().map(|&w| dist::ln_gamma_pdf(w, a)).sum()
            }
            BasePrior::Levy => {
                let nodes: f64 = w0[1..].iter().map(|&w| -w.ln() - w).sum();
                nodes + dist::ln_gamma_pdf(w0[0], kappa_mass)
            }
        }
    }

    /// `x_i * d ln_density / d w_i` at `w = exp(x)`, i.e. the gradient in log
    /// coordinates without the Jacobian term.
    pub fn log_coord_gradient(&self, w0: &[f64], kappa_mass: f64, out: &mut [f64]) {
        match self {
            BasePrior::Finite => {
                let a = slot_concentration(kappa_mass, w0.len() - 1);
                for (o, &w) in out.iter_mut().zip(w0) {
                    *o = (a - 1.0) - w;
                }
            }
            BasePrior::Levy => {
                out[0] = (kappa_mass - 1.0) - w0[0];
                for (o, &w) in out[1..].iter_mut().zip(&w0[1..]) {
                    *o = -1.0 - w;
                }
            }
        }
    }
}

/// Log density of the cluster row `wk` given its base measure `w0`.
pub fn ln_wk_density(wk: &[f64], w0: &[f64]) -> f64 {
    wk.iter()
        .zip(w0)
        .map(|(&x, &shape)| (shape - 1.0) * x.ln() - x - ln_gamma(shape))
        .sum()
}
