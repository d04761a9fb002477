use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::dist::{self, MIN_WEIGHT};

use super::hmc::{hmc_transition, HmcOutcome, W0Target};
use super::state::{ClusterMode, McmcState};

/// Acceptance summary of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub hmc_accept: f64,
    pub mh_accept: f64,
    pub pi_accepted: bool,
}

const HMC_TARGET_ACCEPT: f64 = 0.65;
const MH_TARGET_ACCEPT: f64 = 0.44;

impl McmcState {
    /// One sweep of all six steps. `adapt_iter` enables step-size adaptation
    /// (burn-in only) with the given iteration counter.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R, adapt_iter: Option<usize>) -> StepStats {
        let hmc = self.step1_hmc_w0(rng);
        for k in 1..=self.num_clusters() {
            self.step2_gibbs_wk(k, rng);
        }
        let pi_accepted = self.step3_gibbs_pi(rng);
        self.step4_resample_clusters(rng);
        self.prune();
        self.step5_resample_multiplicities(rng);
        self.prune();
        let (acc, tries) = self.step6_mh_masses(rng);
        let mh_accept = acc as f64 / tries as f64;
        if let Some(t) = adapt_iter {
            let gain = (t as f64 + 10.0).powf(-0.6);
            self.tuning.hmc_step *= (gain * (hmc.accept_prob - HMC_TARGET_ACCEPT)).exp();
            self.tuning.mh_scale *= (gain * (mh_accept - MH_TARGET_ACCEPT)).exp();
        }
        StepStats {
            hmc_accept: hmc.accept_prob,
            mh_accept,
            pi_accepted,
        }
    }

    /// Base-measure target with the normalized cluster weights integrated out.
    pub fn w0_target(&self) -> W0Target {
        let k = self.num_clusters();
        let counts = (1..=k)
            .map(|c| {
                self.n_ki[c]
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(i, &n)| (i, n))
                    .collect()
            })
            .collect();
        W0Target {
            prior: self.prior,
            kappa_mass: self.hyper.kappa_mass,
            counts,
            copies: self.n_k[1..].to_vec(),
            ln_totals: self.w[1..].iter().map(|r| r.total().ln()).collect(),
            pi0: self.pi[0],
            dim: self.num_nodes + 1,
        }
    }

    /// Step 1: one HMC trajectory on `log w_0` (all slots, total included).
    pub fn step1_hmc_w0<R: Rng + ?Sized>(&mut self, rng: &mut R) -> HmcOutcome {
        let target = self.w0_target();
        let mut x: Vec<f64> = self.w[0].as_slice().iter().map(|v| v.ln()).collect();
        let out = hmc_transition(
            &target,
            &mut x,
            self.tuning.hmc_step,
            self.tuning.hmc_leapfrog,
            rng,
        );
        if out.accepted {
            self.w[0].set_entries(x.iter().map(|v| v.exp()).collect());
        }
        out
    }

    /// Step 2: `w̃_k ~ Dirichlet(w_0 + n_k)` with the total `w̄_k` kept.
    pub fn step2_gibbs_wk<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) {
        assert!(k >= 1 && k <= self.num_clusters());
        let conc: Vec<f64> = self.w[0]
            .as_slice()
            .iter()
            .zip(&self.n_ki[k])
            .map(|(&w0, &n)| w0 + n as f64)
            .collect();
        let shares = dist::dirichlet(&conc, rng);
        let total = self.w[k].total();
        self.w[k].set_entries(shares.iter().map(|s| (s * total).max(MIN_WEIGHT)).collect());
    }

    /// Step 3: proportions from the conjugate Dirichlet, Metropolis-corrected
    /// (when enabled) for the omitted `exp(-π_k w̄_k²)` factors. Returns
    /// whether the draw was kept.
    pub fn step3_gibbs_pi<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let k = self.num_clusters();
        let alpha = self.hyper.alpha_dp;
        let mut conc: Vec<f64> = self.n_k.iter().map(|&n| n as f64).collect();
        match self.mode {
            ClusterMode::Adaptive => conc[0] = alpha,
            ClusterMode::Fixed(_) => {
                conc[0] = 0.0;
                for c in conc[1..].iter_mut() {
                    *c += alpha / k as f64;
                }
            }
        }
        if conc.iter().all(|&c| c == 0.0) {
            return false;
        }
        let proposal = dist::dirichlet(&conc, rng);
        if self.pi_correction {
            let log_ratio: f64 = proposal
                .iter()
                .zip(&self.pi)
                .zip(&self.w)
                .map(|((p1, p0), w)| -(p1 - p0) * w.total() * w.total())
                .sum();
            if rng.random::<f64>().ln() >= log_ratio {
                return false;
            }
        }
        self.pi = proposal;
        true
    }

    fn draw_label<R: Rng + ?Sized>(
        &mut self,
        a: usize,
        b: usize,
        buf: &mut Vec<f64>,
        rng: &mut R,
    ) -> usize {
        self.label_weights(a, b, buf);
        let total: f64 = buf.iter().sum();
        let c = if total > 0.0 && total.is_finite() {
            dist::categorical(buf, rng)
        } else if self.num_clusters() > 0 {
            rng.random_range(1..=self.num_clusters())
        } else {
            0
        };
        if c == 0 {
            self.birth(rng)
        } else {
            c
        }
    }

    /// Step 4: relabel every copy from `p(k) ∝ π_k w_{k,i} w_{k,j}`; label 0
    /// opens a new cluster.
    pub fn step4_resample_clusters<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut buf = Vec::new();
        for e in 0..self.edges.len() {
            let (i, j) = self.edges[e];
            let mut ls = std::mem::take(&mut self.labels[e]);
            for l in ls.iter_mut() {
                self.remove_copy(*l as usize, i + 1, j + 1);
                let c = self.draw_label(i + 1, j + 1, &mut buf, rng);
                self.add_copy(c, i + 1, j + 1);
                *l = c as u32;
            }
            self.labels[e] = ls;
        }
        for i in 0..self.num_nodes {
            let mut ls = std::mem::take(&mut self.self_labels[i]);
            for l in ls.iter_mut() {
                self.remove_copy(*l as usize, i + 1, i + 1);
                let c = self.draw_label(i + 1, i + 1, &mut buf, rng);
                self.add_copy(c, i + 1, i + 1);
                *l = c as u32;
            }
            self.self_labels[i] = ls;
        }
    }

    /// Step 5: `z_ij ~ Poisson_{>0}(2 Σ_k π_k w_{k,i} w_{k,j})` per observed
    /// edge and `z_ii ~ Poisson(Σ_k π_k w_{k,i}²)` per node. Surviving copies
    /// keep their labels, extra copies draw fresh ones, surplus copies are
    /// dropped from the end.
    pub fn step5_resample_multiplicities<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut buf = Vec::new();
        for e in 0..self.edges.len() {
            let (i, j) = self.edges[e];
            self.rate_weights(i + 1, j + 1, &mut buf);
            let rate = 2.0 * buf.iter().sum::<f64>();
            let z = match dist::truncated_poisson(rate, rng) {
                Ok(z) => z as usize,
                Err(_) => {
                    self.underflows += 1;
                    1
                }
            };
            self.resize_copies(e, None, z, &mut buf, rng);
        }
        for i in 0..self.num_nodes {
            self.rate_weights(i + 1, i + 1, &mut buf);
            let z = dist::poisson(buf.iter().sum(), rng) as usize;
            self.resize_copies(i, Some(()), z, &mut buf, rng);
        }
    }

    fn resize_copies<R: Rng + ?Sized>(
        &mut self,
        idx: usize,
        diag: Option<()>,
        z: usize,
        buf: &mut Vec<f64>,
        rng: &mut R,
    ) {
        let (a, b) = match diag {
            None => (self.edges[idx].0 + 1, self.edges[idx].1 + 1),
            Some(()) => (idx + 1, idx + 1),
        };
        let mut ls = match diag {
            None => std::mem::take(&mut self.labels[idx]),
            Some(()) => std::mem::take(&mut self.self_labels[idx]),
        };
        while ls.len() > z {
            let c = ls.pop().unwrap();
            self.remove_copy(c as usize, a, b);
        }
        while ls.len() < z {
            let c = self.draw_label(a, b, buf, rng);
            self.add_copy(c, a, b);
            ls.push(c as u32);
        }
        match diag {
            None => self.labels[idx] = ls,
            Some(()) => self.self_labels[idx] = ls,
        }
    }

    /// Random-walk MH on `ln w̄_k` for one active cluster; the row is rescaled
    /// on acceptance.
    pub fn mh_cluster_total<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> bool {
        let w0 = self.w[0].total();
        let n = self.n_k[k] as f64;
        let pi = self.pi[k];
        let target = |t: f64| (2.0 * n + w0 - 1.0) * t.ln() - t - pi * t * t + t.ln();
        let cur = self.w[k].total();
        let prop = cur * (self.tuning.mh_scale * dist::standard_normal(rng)).exp();
        if !(prop > 0.0) || !prop.is_finite() {
            return false;
        }
        if rng.random::<f64>().ln() < target(prop) - target(cur) {
            self.w[k].rescale_to(prop);
            true
        } else {
            false
        }
    }

    /// Log target of the base-measure total with its normalized weights held
    /// and the cluster rows' normalized weights integrated out.
    pub fn base_total_log_target(&self, total: f64) -> f64 {
        let cur = self.w[0].total();
        let shares: Vec<f64> = self.w[0]
            .as_slice()
            .iter()
            .map(|v| v / cur * total)
            .collect();
        let mut lp = self.prior.ln_density(&shares, self.hyper.kappa_mass)
            + self.num_nodes as f64 * total.ln()
            + total.ln();
        for k in 1..=self.num_clusters() {
            let n = self.n_k[k] as f64;
            lp += (total - 1.0) * self.w[k].total().ln() - ln_gamma(total + 2.0 * n);
            for (i, &c) in self.n_ki[k].iter().enumerate() {
                if c > 0 {
                    lp += ln_gamma(shares[i] + c as f64) - ln_gamma(shares[i]);
                }
            }
        }
        lp - self.pi[0] * total * total
    }

    /// Random-walk MH on `ln w̄_0`; on acceptance the base row is rescaled
    /// and every cluster row's normalized weights are redrawn.
    pub fn mh_base_total<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let cur = self.w[0].total();
        let prop = cur * (self.tuning.mh_scale * dist::standard_normal(rng)).exp();
        if !(prop > 0.0) || !prop.is_finite() {
            return false;
        }
        let log_ratio = self.base_total_log_target(prop) - self.base_total_log_target(cur);
        if rng.random::<f64>().ln() < log_ratio {
            let c = prop / cur;
            let scaled = self.w[0].as_slice().iter().map(|v| v * c).collect();
            self.w[0].set_entries(scaled);
            for k in 1..=self.num_clusters() {
                self.step2_gibbs_wk(k, rng);
            }
            true
        } else {
            false
        }
    }

    /// Step 6: every cluster total, then the base total. Returns
    /// `(accepted, attempted)`.
    pub fn step6_mh_masses<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, usize) {
        let mut acc = 0;
        let k = self.num_clusters();
        for c in 1..=k {
            acc += self.mh_cluster_total(c, rng) as usize;
        }
        acc += self.mh_base_total(rng) as usize;
        (acc, k + 1)
    }
}
