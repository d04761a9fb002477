//! Joint-distribution (Geweke) check of the sampler in fixed-`K` mode.
//!
//! Marginal samples of (parameters, latent multigraph) are drawn two ways:
//! directly from the model, and by alternating one sampler sweep with a
//! fresh draw of the latent multigraph given the parameters. The sampler
//! targets the model exactly when both agree.
//!
//! Observed nodes are the non-slack slots and unobserved nodes have no edges
//! by definition, so the parameter prior is tilted by the probability that
//! no edge touches the slack slot. Forward draws apply that tilt by
//! rejection.

use rand::Rng;

use crate::crm;
use crate::dist;
use crate::error::Result;
use crate::generate::ModelDraw;
use crate::rng::stream_rng;
use crate::stats;

use super::state::{fixed_pi_prior, ClusterMode, McmcState, Tuning};
use super::{ChainConfig, Hyper};

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeConfig {
    pub num_nodes: usize,
    pub k: usize,
    pub hyper: Hyper,
    pub rounds: usize,
    pub seed: u64,
    pub tuning: Tuning,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        Self {
            num_nodes: 8,
            k: 3,
            hyper: Hyper {
                alpha_dp: 1.0,
                kappa_mass: 4.0,
            },
            rounds: 10_000,
            seed: 0,
            tuning: Tuning {
                hmc_step: 0.1,
                hmc_leapfrog: 10,
                mh_scale: 0.5,
            },
        }
    }
}

impl GewekeConfig {
    fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            hyper: self.hyper,
            k_init: self.k,
            k_max: self.k,
            tuning: self.tuning,
            cluster_mode: ClusterMode::Fixed(self.k),
            adapt: false,
            ..ChainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeStat {
    pub name: &'static str,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
}

impl GewekeStat {
    /// Difference of means in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        (self.forward_mean - self.successive_mean)
            / (self.forward_se.powi(2) + self.successive_se.powi(2)).sqrt()
    }
}

pub const STAT_NAMES: [&str; 4] = ["w0_total", "total_multiplicity", "active_k", "pi_1"];

/// Parameters from the prior tilted by `P(no slack edges | θ)`.
pub fn forward_theta<R: Rng + ?Sized>(cfg: &GewekeConfig, rng: &mut R) -> ModelDraw {
    loop {
        let pi = fixed_pi_prior(cfg.hyper.alpha_dp, cfg.k, rng);
        let w0 = crm::sample_w0(cfg.hyper.kappa_mass, cfg.num_nodes, rng);
        let mut w = vec![w0];
        for _ in 0..cfg.k {
            let row = crm::sample_wk_prior(&w[0], rng);
            w.push(row);
        }
        let slack_rate: f64 = (1..=cfg.k)
            .map(|k| {
                let (t, s) = (w[k].total(), w[k].observed_mass());
                pi[k] * (t * t - s * s)
            })
            .sum();
        if rng.random::<f64>() < (-slack_rate).exp() {
            return ModelDraw { pi, w };
        }
    }
}

/// Latent multigraph over the observed nodes given the parameters.
pub fn sample_latent<R: Rng + ?Sized>(
    theta: ModelDraw,
    cfg: &ChainConfig,
    rng: &mut R,
) -> McmcState {
    let n = theta.num_nodes();
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    let mut self_labels = vec![Vec::new(); n];
    let mut q = Vec::new();
    let mut draw = |a: usize, b: usize, fold: f64, rng: &mut R| -> Vec<u32> {
        q.clear();
        q.extend(
            theta
                .pi
                .iter()
                .zip(&theta.w)
                .map(|(p, w)| p * w.slot(a) * w.slot(b)),
        );
        let z = dist::poisson(fold * q.iter().sum::<f64>(), rng);
        (0..z).map(|_| dist::categorical(&q, rng) as u32).collect()
    };
    for i in 0..n {
        for j in i + 1..n {
            let ls = draw(i + 1, j + 1, 2.0, rng);
            if !ls.is_empty() {
                edges.push((i, j));
                labels.push(ls);
            }
        }
        self_labels[i] = draw(i + 1, i + 1, 1.0, rng);
    }
    McmcState::from_parts(n, edges, theta, labels, self_labels, cfg)
}

fn statistics(s: &McmcState) -> [f64; 4] {
    [
        s.weights()[0].total(),
        s.total_multiplicity() as f64,
        s.active_clusters() as f64,
        s.pi()[1],
    ]
}

/// Runs both samplers for `cfg.rounds` rounds each.
pub fn run_geweke(cfg: &GewekeConfig) -> Result<Vec<GewekeStat>> {
    let chain_cfg = cfg.chain_config();
    chain_cfg.validate()?;

    let mut rng = stream_rng(cfg.seed, 0);
    let forward: Vec<[f64; 4]> = (0..cfg.rounds)
        .map(|_| {
            let theta = forward_theta(cfg, &mut rng);
            statistics(&sample_latent(theta, &chain_cfg, &mut rng))
        })
        .collect();

    let mut rng = stream_rng(cfg.seed, 1);
    let theta = forward_theta(cfg, &mut rng);
    let mut state = sample_latent(theta, &chain_cfg, &mut rng);
    let mut successive = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        state.sweep(&mut rng, None);
        successive.push(statistics(&state));
        let theta = state.theta();
        let tuning = state.tuning;
        state = sample_latent(theta, &chain_cfg, &mut rng);
        state.tuning = tuning;
    }

    let column = |rows: &[[f64; 4]], c: usize| rows.iter().map(|r| r[c]).collect::<Vec<_>>();
    let batches = 50.min(cfg.rounds);
    Ok(STAT_NAMES
        .iter()
        .enumerate()
        .map(|(c, &name)| {
            let f = column(&forward, c);
            let s = column(&successive, c);
            GewekeStat {
                name,
                forward_mean: stats::mean(&f),
                forward_se: stats::std_dev(&f) / (f.len() as f64).sqrt(),
                successive_mean: stats::mean(&s),
                successive_se: stats::batch_means_se(&s, batches),
            }
        })
        .collect())
}
