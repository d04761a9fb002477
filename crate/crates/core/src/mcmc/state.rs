use rand::Rng;

use crate::crm::{self, BasePrior, CrmWeights};
use crate::dist;
use crate::error::{Error, Result};
use crate::generate::ModelDraw;
use crate::graph::{MultiGraph, SimpleGraph};

use super::ChainConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub alpha_dp: f64,
    pub kappa_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuning {
    pub hmc_step: f64,
    pub hmc_leapfrog: usize,
    pub mh_scale: f64,
}

/// How the number of clusters is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMode {
    /// Remainder mass `π_0` with births from the base measure and pruning of
    /// empty clusters.
    Adaptive,
    /// Exactly `K` clusters, `π_0 = 0`, symmetric `Dirichlet(α/K)` prior.
    Fixed(usize),
}

/// Full sampler state over a fixed observed graph.
///
/// Cluster index 0 is the remainder (`pi[0]`, base measure `w[0]`); active
/// clusters are `1..=K`. Each observed edge carries `z ≥ 1` copies and each
/// node `z_self ≥ 0` self-loop copies; every copy has a cluster label.
#[derive(Debug, Clone)]
pub struct McmcState {
    pub(crate) num_nodes: usize,
    pub(crate) edges: Vec<(usize, usize)>,
    pub(crate) pi: Vec<f64>,
    pub(crate) w: Vec<CrmWeights>,
    pub(crate) labels: Vec<Vec<u32>>,
    pub(crate) self_labels: Vec<Vec<u32>>,
    /// Copies per cluster.
    pub(crate) n_k: Vec<u64>,
    /// Endpoint incidences per cluster and slot (slot 0 always zero),
    /// self-loops counted twice.
    pub(crate) n_ki: Vec<Vec<u64>>,
    pub hyper: Hyper,
    pub tuning: Tuning,
    pub mode: ClusterMode,
    pub prior: BasePrior,
    pub k_max: usize,
    pub pi_correction: bool,
    /// Rate underflows seen by the multiplicity step since the last reset.
    pub underflows: u64,
}

impl McmcState {
    /// Initial state: weights from the priors, one copy per observed edge,
    /// no self-loops, labels uniform over `1..=k_init`.
    pub fn init<R: Rng + ?Sized>(g: &SimpleGraph, cfg: &ChainConfig, rng: &mut R) -> Self {
        let (k, pi) = match cfg.cluster_mode {
            ClusterMode::Adaptive => (
                cfg.k_init,
                crm::sample_gem(cfg.hyper.alpha_dp, cfg.k_init, rng).pi,
            ),
            ClusterMode::Fixed(k) => (k, fixed_pi_prior(cfg.hyper.alpha_dp, k, rng)),
        };
        let w0 = crm::sample_w0(cfg.hyper.kappa_mass, g.num_nodes(), rng);
        let mut w = vec![w0];
        for _ in 0..k {
            let row = crm::sample_wk_prior(&w[0], rng);
            w.push(row);
        }
        let labels = g
            .edges()
            .iter()
            .map(|_| vec![rng.random_range(1..=k as u32)])
            .collect();
        let mut s = Self::from_parts(
            g.num_nodes(),
            g.edges().to_vec(),
            ModelDraw { pi, w },
            labels,
            vec![Vec::new(); g.num_nodes()],
            cfg,
        );
        s.prune();
        s
    }

    /// Assembles a state from explicit parameters and labeled copies.
    pub fn from_parts(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        theta: ModelDraw,
        labels: Vec<Vec<u32>>,
        self_labels: Vec<Vec<u32>>,
        cfg: &ChainConfig,
    ) -> Self {
        assert_eq!(labels.len(), edges.len());
        assert_eq!(self_labels.len(), num_nodes);
        let k = theta.pi.len() - 1;
        let mut s = Self {
            num_nodes,
            edges,
            pi: theta.pi,
            w: theta.w,
            labels,
            self_labels,
            n_k: vec![0; k + 1],
            n_ki: vec![vec![0; num_nodes + 1]; k + 1],
            hyper: cfg.hyper,
            tuning: cfg.tuning,
            mode: cfg.cluster_mode,
            prior: cfg.w0_prior,
            k_max: cfg.k_max,
            pi_correction: cfg.pi_correction,
            underflows: 0,
        };
        let (n_k, n_ki) = s.recount();
        s.n_k = n_k;
        s.n_ki = n_ki;
        s
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_clusters(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn weights(&self) -> &[CrmWeights] {
        &self.w
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn copies_per_cluster(&self) -> &[u64] {
        &self.n_k
    }

    pub fn incidence(&self, k: usize) -> &[u64] {
        &self.n_ki[k]
    }

    pub fn edge_multiplicity(&self, e: usize) -> u32 {
        self.labels[e].len() as u32
    }

    pub fn self_multiplicity(&self, i: usize) -> u32 {
        self.self_labels[i].len() as u32
    }

    pub fn edge_labels(&self, e: usize) -> &[u32] {
        &self.labels[e]
    }

    /// Off-diagonal plus diagonal copies.
    pub fn total_multiplicity(&self) -> u64 {
        let off: usize = self.labels.iter().map(Vec::len).sum();
        let diag: usize = self.self_labels.iter().map(Vec::len).sum();
        (off + diag) as u64
    }

    pub fn active_clusters(&self) -> usize {
        self.n_k[1..].iter().filter(|&&n| n > 0).count()
    }

    pub fn multigraph(&self) -> MultiGraph {
        let mut mg = MultiGraph::new(self.num_nodes);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            mg.add(i, j, self.labels[e].len() as u32);
        }
        for (i, l) in self.self_labels.iter().enumerate() {
            mg.add(i, i, l.len() as u32);
        }
        mg
    }

    pub fn theta(&self) -> ModelDraw {
        ModelDraw {
            pi: self.pi.clone(),
            w: self.w.clone(),
        }
    }

    /// Copy counts recomputed from the labels.
    pub fn recount(&self) -> (Vec<u64>, Vec<Vec<u64>>) {
        let k = self.num_clusters();
        let mut n_k = vec![0u64; k + 1];
        let mut n_ki = vec![vec![0u64; self.num_nodes + 1]; k + 1];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            for &c in &self.labels[e] {
                n_k[c as usize] += 1;
                n_ki[c as usize][i + 1] += 1;
                n_ki[c as usize][j + 1] += 1;
            }
        }
        for (i, ls) in self.self_labels.iter().enumerate() {
            for &c in ls {
                n_k[c as usize] += 1;
                n_ki[c as usize][i + 1] += 2;
            }
        }
        (n_k, n_ki)
    }

    /// Checks the maintained tallies and structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let k = self.num_clusters();
        let fail = |m: String| {
            Err(Error::Numerical {
                epoch: 0,
                last_good: None,
                msg: m,
            })
        };
        let (n_k, n_ki) = self.recount();
        if n_k != self.n_k || n_ki != self.n_ki {
            return fail("copy counts disagree with labels".into());
        }
        if self.w.len() != k + 1 {
            return fail("weight rows do not match cluster count".into());
        }
        let s: f64 = self.pi.iter().sum();
        if (s - 1.0).abs() > 1e-9 || self.pi.iter().any(|&p| p < 0.0) {
            return fail(format!("proportions sum to {s}"));
        }
        for row in &self.w {
            if row.as_slice().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return fail("non-positive weight".into());
            }
            let t: f64 = row.as_slice().iter().sum();
            if (t - row.total()).abs() > 1e-10 * t {
                return fail("stored total out of sync".into());
            }
        }
        if self.labels.iter().any(Vec::is_empty) {
            return fail("observed edge without copies".into());
        }
        if self.mode == ClusterMode::Adaptive && self.n_k[1..].contains(&0) {
            return fail("empty active cluster".into());
        }
        Ok(())
    }

    /// Whether label 0 (a new cluster) may be drawn.
    pub(crate) fn births_allowed(&self) -> bool {
        self.mode == ClusterMode::Adaptive && self.num_clusters() < self.k_max
    }

    /// Unnormalized label weights `π_k w_{k,a} w_{k,b}` for slots `a`, `b`
    /// (1-based), index 0 included only when births are allowed.
    pub(crate) fn label_weights(&self, a: usize, b: usize, out: &mut Vec<f64>) {
        out.clear();
        for k in 0..self.pi.len() {
            let q = self.pi[k] * self.w[k].slot(a) * self.w[k].slot(b);
            out.push(if k == 0 && !self.births_allowed() {
                0.0
            } else {
                q
            });
        }
    }

    /// Per-pair rate weights used for the likelihood; the remainder cluster
    /// contributes whenever it carries mass.
    pub(crate) fn rate_weights(&self, a: usize, b: usize, out: &mut Vec<f64>) {
        out.clear();
        for k in 0..self.pi.len() {
            out.push(self.pi[k] * self.w[k].slot(a) * self.w[k].slot(b));
        }
    }

    pub(crate) fn add_copy(&mut self, c: usize, a: usize, b: usize) {
        self.n_k[c] += 1;
        self.n_ki[c][a] += 1;
        self.n_ki[c][b] += 1;
    }

    pub(crate) fn remove_copy(&mut self, c: usize, a: usize, b: usize) {
        self.n_k[c] -= 1;
        self.n_ki[c][a] -= 1;
        self.n_ki[c][b] -= 1;
    }

    /// Opens a new cluster: weights from the prior given the base measure,
    /// and a `Beta(1, α)` share of the remainder mass. Returns its index.
    pub(crate) fn birth<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let row = crm::sample_wk_prior(&self.w[0], rng);
        let b = dist::beta(1.0, self.hyper.alpha_dp, rng);
        let share = b * self.pi[0];
        self.pi[0] -= share;
        self.pi.push(share);
        self.w.push(row);
        self.n_k.push(0);
        self.n_ki.push(vec![0; self.num_nodes + 1]);
        self.pi.len() - 1
    }

    /// Drops empty clusters (adaptive mode only); their mass returns to `π_0`.
    pub fn prune(&mut self) {
        if self.mode != ClusterMode::Adaptive {
            return;
        }
        let k = self.num_clusters();
        let mut remap = vec![0u32; k + 1];
        let mut next = 1u32;
        for c in 1..=k {
            if self.n_k[c] > 0 {
                remap[c] = next;
                next += 1;
            }
        }
        if next as usize == k + 1 {
            return;
        }
        let mut pi = vec![self.pi[0]];
        let mut w = vec![self.w[0].clone()];
        let mut n_k = vec![0];
        let mut n_ki = vec![std::mem::take(&mut self.n_ki[0])];
        for c in 1..=k {
            if remap[c] == 0 {
                pi[0] += self.pi[c];
            } else {
                pi.push(self.pi[c]);
                w.push(self.w[c].clone());
                n_k.push(self.n_k[c]);
                n_ki.push(std::mem::take(&mut self.n_ki[c]));
            }
        }
        for ls in self.labels.iter_mut().chain(self.self_labels.iter_mut()) {
            for l in ls.iter_mut() {
                *l = remap[*l as usize];
            }
        }
        self.pi = pi;
        self.w = w;
        self.n_k = n_k;
        self.n_ki = n_ki;
    }

    /// Complete-data log density of the copies and their labels given the
    /// parameters, plus the prior log densities of the parameters.
    ///
    /// Each observed edge contributes the Poisson log-pmf of its multiplicity
    /// under the folded rate, each node the Poisson log-pmf of its self-loop
    /// count, and each copy `ln(q_c / Σ_k q_k)` for its label.
    pub fn log_joint(&self) -> f64 {
        let mut lp = 0.0;
        let mut q = Vec::with_capacity(self.pi.len());
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            self.rate_weights(i + 1, j + 1, &mut q);
            lp += copies_term(&q, 2.0, &self.labels[e]);
        }
        for i in 0..self.num_nodes {
            self.rate_weights(i + 1, i + 1, &mut q);
            lp += copies_term(&q, 1.0, &self.self_labels[i]);
        }
        lp + self.log_prior()
    }

    pub fn log_prior(&self) -> f64 {
        let k = self.num_clusters();
        let alpha = self.hyper.alpha_dp;
        let mut lp = match self.mode {
            ClusterMode::Fixed(_) => {
                dist::ln_dirichlet_pdf(&self.pi[1..], &vec![alpha / k as f64; k])
            }
            ClusterMode::Adaptive => {
                let mut conc = vec![1.0; k + 1];
                conc[0] = alpha;
                dist::ln_dirichlet_pdf(&self.pi, &conc)
            }
        };
        lp += self
            .prior
            .ln_density(self.w[0].as_slice(), self.hyper.kappa_mass);
        for row in &self.w[1..] {
            lp += crm::ln_wk_density(row.as_slice(), self.w[0].as_slice());
        }
        lp
    }
}

/// Poisson log-pmf of `labels.len()` at rate `fold * Σq` plus the label terms.
fn copies_term(q: &[f64], fold: f64, labels: &[u32]) -> f64 {
    let rho: f64 = q.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lp = dist::ln_poisson_pmf(labels.len() as u64, fold * rho);
    for &c in labels {
        lp += (q[c as usize].max(f64::MIN_POSITIVE) / rho).ln();
    }
    lp
}

/// `π` with zero remainder and `Dirichlet(α/K, .., α/K)` over `K` clusters.
pub(crate) fn fixed_pi_prior<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let mut conc = vec![alpha / k as f64; k + 1];
    conc[0] = 0.0;
    dist::dirichlet(&conc, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn cfg(mode: ClusterMode) -> ChainConfig {
        ChainConfig {
            cluster_mode: mode,
            k_init: 2,
            ..ChainConfig::default()
        }
    }

    #[test]
    fn init_on_empty_and_triangle() {
        let g = SimpleGraph::empty(4);
        let s = McmcState::init(&g, &cfg(ClusterMode::Adaptive), &mut stream_rng(1, 0));
        assert_eq!(s.total_multiplicity(), 0);
        s.check_invariants().unwrap();

        let tri = SimpleGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = McmcState::init(&tri, &cfg(ClusterMode::Fixed(2)), &mut stream_rng(1, 0));
        assert_eq!(s.total_multiplicity(), 3);
        assert!(s.labels.iter().flatten().all(|&l| l == 1 || l == 2));
        s.check_invariants().unwrap();
    }

    #[test]
    fn init_is_seed_deterministic() {
        let tri = SimpleGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let a = McmcState::init(&tri, &cfg(ClusterMode::Adaptive), &mut stream_rng(5, 0));
        let b = McmcState::init(&tri, &cfg(ClusterMode::Adaptive), &mut stream_rng(5, 0));
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.pi, b.pi);
        assert_eq!(a.w, b.w);
    }

    fn w(v: Vec<f64>) -> CrmWeights {
        CrmWeights::from_vec(v).unwrap()
    }

    #[test]
    fn empty_graph_log_joint_is_minus_sum_of_self_rates() {
        let theta = ModelDraw {
            pi: vec![0.0, 0.5, 0.5],
            w: vec![
                w(vec![1.0, 0.5, 0.5]),
                w(vec![1.0, 0.2, 0.3]),
                w(vec![0.5, 0.6, 0.1]),
            ],
        };
        let s = McmcState::from_parts(
            2,
            vec![],
            theta,
            vec![],
            vec![vec![], vec![]],
            &cfg(ClusterMode::Fixed(2)),
        );
        let lambda = 0.5 * (0.04 + 0.36) + 0.5 * (0.09 + 0.01);
        assert!((s.log_joint() - (-lambda + s.log_prior())).abs() < 1e-12);
    }

    #[test]
    fn log_joint_by_hand_on_three_nodes() {
        let theta = ModelDraw {
            pi: vec![0.0, 0.3, 0.7],
            w: vec![
                w(vec![0.4, 1.0, 0.8, 0.6]),
                w(vec![0.1, 1.2, 0.4, 0.2]),
                w(vec![0.3, 0.5, 0.9, 1.1]),
            ],
        };
        let s = McmcState::from_parts(
            3,
            vec![(0, 1), (1, 2)],
            theta,
            vec![vec![1, 2], vec![2]],
            vec![vec![1], vec![], vec![]],
            &cfg(ClusterMode::Fixed(2)),
        );
        let q = |i: usize, j: usize| {
            let (a, b) = ([1.2, 0.4, 0.2], [0.5, 0.9, 1.1]);
            (0.3 * a[i] * a[j], 0.7 * b[i] * b[j])
        };
        let pois = |k: u64, r: f64| k as f64 * r.ln() - r - dist::ln_factorial(k);
        let (a01, b01) = q(0, 1);
        let (a12, b12) = q(1, 2);
        let mut lp =
            pois(2, 2.0 * (a01 + b01)) + (a01 / (a01 + b01)).ln() + (b01 / (a01 + b01)).ln();
        lp += pois(1, 2.0 * (a12 + b12)) + (b12 / (a12 + b12)).ln();
        let (a00, b00) = q(0, 0);
        lp += pois(1, a00 + b00) + (a00 / (a00 + b00)).ln();
        let (a11, b11) = q(1, 1);
        let (a22, b22) = q(2, 2);
        lp += -(a11 + b11) - (a22 + b22);
        // priors
        lp += dist::ln_dirichlet_pdf(&[0.3, 0.7], &[0.5, 0.5]);
        let a = 10.0 / 4.0;
        for &v in &[0.4, 1.0, 0.8, 0.6] {
            lp += (a - 1.0) * f64::ln(v) - v - statrs::function::gamma::ln_gamma(a);
        }
        let w0 = [0.4, 1.0, 0.8, 0.6];
        for row in [[0.1f64, 1.2, 0.4, 0.2], [0.3, 0.5, 0.9, 1.1]] {
            for (x, s0) in row.iter().zip(&w0) {
                lp += (s0 - 1.0) * x.ln() - x - statrs::function::gamma::ln_gamma(*s0);
            }
        }
        assert!(
            (s.log_joint() - lp).abs() < 1e-10,
            "{} vs {lp}",
            s.log_joint()
        );
        s.check_invariants().unwrap();
        assert_eq!(s.incidence(1), &[0, 3, 1, 0]);
    }

    #[test]
    fn log_joint_is_invariant_to_relabeling() {
        let tri = SimpleGraph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        for mode in [ClusterMode::Fixed(3), ClusterMode::Adaptive] {
            let c = ChainConfig {
                cluster_mode: mode,
                k_init: 3,
                ..ChainConfig::default()
            };
            let s = McmcState::init(&tri, &c, &mut stream_rng(2, 0));
            let k = s.num_clusters();
            // reverse the active cluster order
            let perm: Vec<usize> = std::iter::once(0).chain((1..=k).rev()).collect();
            let theta = ModelDraw {
                pi: perm.iter().map(|&p| s.pi[p]).collect(),
                w: perm.iter().map(|&p| s.w[p].clone()).collect(),
            };
            let inv = |l: &u32| (k + 1 - *l as usize) as u32;
            let t = McmcState::from_parts(
                4,
                s.edges.clone(),
                theta,
                s.labels
                    .iter()
                    .map(|ls| ls.iter().map(inv).collect())
                    .collect(),
                s.self_labels.clone(),
                &c,
            );
            assert!((s.log_joint() - t.log_joint()).abs() < 1e-9);
        }
    }

    #[test]
    fn prune_returns_mass_to_remainder() {
        let theta = ModelDraw {
            pi: vec![0.1, 0.2, 0.3, 0.4],
            w: vec![
                w(vec![1.0, 1.0]),
                w(vec![1.0, 1.0]),
                w(vec![2.0, 2.0]),
                w(vec![3.0, 3.0]),
            ],
        };
        let mut s = McmcState::from_parts(
            1,
            vec![],
            theta,
            vec![],
            vec![vec![3]],
            &cfg(ClusterMode::Adaptive),
        );
        s.prune();
        assert_eq!(s.num_clusters(), 1);
        assert!((s.pi[0] - 0.6).abs() < 1e-15);
        assert_eq!(s.self_labels[0], vec![1]);
        assert_eq!(s.w[1].slot(0), 3.0);
        s.check_invariants().unwrap();
    }
}
