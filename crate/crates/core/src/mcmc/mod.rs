//! Posterior inference for the mixture model given an observed simple graph.
//!
//! One epoch runs, in order: HMC on the base-measure weights, Dirichlet
//! updates of each cluster's normalized weights, the cluster-proportion
//! update, cluster relabeling, multiplicity resampling and random-walk
//! Metropolis-Hastings on the total masses.

mod chain;
pub mod geweke;
pub mod hmc;
mod state;
mod steps;
mod trace;

pub use chain::{run_chain, Chain, ChainOutput};
pub use state::{ClusterMode, Hyper, McmcState, Tuning};
pub use steps::StepStats;
pub use trace::{
    histogram, posterior_mean_multiplicity, trace_csv, ChainTrace, EpochStats, Snapshot,
};

use crate::config::KeyValues;
use crate::crm::BasePrior;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub hyper: Hyper,
    pub epochs: usize,
    pub burn_in_frac: f64,
    pub thin: usize,
    pub k_init: usize,
    pub tuning: Tuning,
    pub seed: u64,
    pub cluster_mode: ClusterMode,
    /// Upper bound on active clusters in adaptive mode.
    pub k_max: usize,
    pub w0_prior: BasePrior,
    /// Metropolis-correct the proportion update for the rate term it omits.
    pub pi_correction: bool,
    /// Adapt step sizes during burn-in.
    pub adapt: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            hyper: Hyper {
                alpha_dp: 1.0,
                kappa_mass: 10.0,
            },
            epochs: 1000,
            burn_in_frac: 0.2,
            thin: 10,
            k_init: 5,
            tuning: Tuning {
                hmc_step: 0.05,
                hmc_leapfrog: 10,
                mh_scale: 0.5,
            },
            seed: 0,
            cluster_mode: ClusterMode::Adaptive,
            k_max: 50,
            w0_prior: BasePrior::Finite,
            pi_correction: true,
            adapt: true,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "alpha_dp",
    "kappa_mass",
    "epochs",
    "burn_in_frac",
    "thin",
    "k_init",
    "hmc_step",
    "hmc_leapfrog",
    "mh_scale",
    "seed",
    "cluster_mode",
    "k_max",
    "w0_prior",
    "pi_correction",
    "adapt",
];

impl ChainConfig {
    /// Overrides defaults with any keys present in `kv`.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        kv.check_known(CONFIG_KEYS)?;
        let mut c = Self::default();
        macro_rules! take {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get($key)? {
                    $field = v;
                }
            };
        }
        take!("alpha_dp", c.hyper.alpha_dp);
        take!("kappa_mass", c.hyper.kappa_mass);
        take!("epochs", c.epochs);
        take!("burn_in_frac", c.burn_in_frac);
        take!("thin", c.thin);
        take!("k_init", c.k_init);
        take!("hmc_step", c.tuning.hmc_step);
        take!("hmc_leapfrog", c.tuning.hmc_leapfrog);
        take!("mh_scale", c.tuning.mh_scale);
        take!("seed", c.seed);
        take!("k_max", c.k_max);
        take!("pi_correction", c.pi_correction);
        take!("adapt", c.adapt);
        if let Some(p) = kv.get_str("w0_prior") {
            c.w0_prior = p.parse()?;
        }
        if let Some(m) = kv.get_str("cluster_mode") {
            c.cluster_mode = match m {
                "adaptive" => ClusterMode::Adaptive,
                "fixed" => ClusterMode::Fixed(c.k_init),
                other => return Err(Error::Config(format!("unknown cluster_mode `{other}`"))),
            };
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("alpha_dp", self.hyper.alpha_dp);
        kv.set("kappa_mass", self.hyper.kappa_mass);
        kv.set("epochs", self.epochs);
        kv.set("burn_in_frac", self.burn_in_frac);
        kv.set("thin", self.thin);
        kv.set("k_init", self.k_init);
        kv.set("hmc_step", self.tuning.hmc_step);
        kv.set("hmc_leapfrog", self.tuning.hmc_leapfrog);
        kv.set("mh_scale", self.tuning.mh_scale);
        kv.set("seed", self.seed);
        kv.set(
            "cluster_mode",
            match self.cluster_mode {
                ClusterMode::Adaptive => "adaptive",
                ClusterMode::Fixed(_) => "fixed",
            },
        );
        kv.set("k_max", self.k_max);
        kv.set("w0_prior", self.w0_prior.name());
        kv.set("pi_correction", self.pi_correction);
        kv.set("adapt", self.adapt);
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.hyper.alpha_dp > 0.0) || !self.hyper.alpha_dp.is_finite() {
            return bad("alpha_dp must be positive");
        }
        if !(self.hyper.kappa_mass > 0.0) || !self.hyper.kappa_mass.is_finite() {
            return bad("kappa_mass must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.burn_in_frac) {
            return bad("burn_in_frac must lie in [0, 1)");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.k_init == 0 {
            return bad("k_init must be at least 1");
        }
        if !(self.tuning.hmc_step > 0.0) || self.tuning.hmc_leapfrog == 0 {
            return bad("hmc_step must be positive and hmc_leapfrog at least 1");
        }
        if !(self.tuning.mh_scale > 0.0) {
            return bad("mh_scale must be positive");
        }
        if self.k_max < self.k_init {
            return bad("k_max must be at least k_init");
        }
        Ok(())
    }

    pub fn burn_in_epochs(&self) -> usize {
        (self.burn_in_frac * self.epochs as f64).floor() as usize
    }
}
