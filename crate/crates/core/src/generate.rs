//! Forward simulation of the mixture model and the sparsity bench.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::crm::{self, CrmWeights};
use crate::dist;
use crate::error::{Error, Result};
use crate::graph::{collapse, MultiGraph, SimpleGraph};
use crate::rng::stream_rng;

/// Largest graph the pairwise path accepts.
pub const PAIRWISE_MAX_NODES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub alpha_dp: f64,
    pub kappa_mass: f64,
    pub k_gen: usize,
    pub num_nodes: usize,
    pub seed: u64,
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_dp > 0.0 && self.alpha_dp.is_finite()) {
            return Err(Error::Config(format!(
                "alpha_dp must be positive, got {}",
                self.alpha_dp
            )));
        }
        if !(self.kappa_mass > 0.0 && self.kappa_mass.is_finite()) {
            return Err(Error::Config(format!(
                "kappa_mass must be positive, got {}",
                self.kappa_mass
            )));
        }
        if self.k_gen == 0 {
            return Err(Error::Config("k_gen must be at least 1".into()));
        }
        Ok(())
    }
}

/// Frozen model parameters: `pi[0]` and `w[0]` are the remainder mass and
/// the base measure, which also act as the catch-all cluster for the
/// clusters beyond the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDraw {
    pub pi: Vec<f64>,
    pub w: Vec<CrmWeights>,
}

impl ModelDraw {
    pub fn num_nodes(&self) -> usize {
        self.w[0].num_nodes()
    }

    /// Expected number of ordered edge draws, `Σ_k π_k w̄_k²`.
    pub fn lambda(&self) -> f64 {
        self.pi
            .iter()
            .zip(&self.w)
            .map(|(p, w)| p * w.total() * w.total())
            .sum()
    }

    /// Expected total multiplicity after discarding slack edges.
    pub fn expected_observed_multiplicity(&self) -> f64 {
        self.pi
            .iter()
            .zip(&self.w)
            .map(|(p, w)| p * w.observed_mass() * w.observed_mass())
            .sum()
    }

    /// Folded Poisson rate of unordered pair `{i, j}` (0-based nodes):
    /// doubled off the diagonal.
    pub fn pair_rate(&self, i: usize, j: usize) -> f64 {
        let r: f64 = self
            .pi
            .iter()
            .zip(&self.w)
            .map(|(p, w)| p * w.node(i) * w.node(j))
            .sum();
        if i == j {
            r
        } else {
            2.0 * r
        }
    }
}

pub fn sample_model<R: Rng + ?Sized>(p: &GenParams, rng: &mut R) -> ModelDraw {
    let gem = crm::sample_gem(p.alpha_dp, p.k_gen, rng);
    let w0 = crm::sample_w0(p.kappa_mass, p.num_nodes, rng);
    let mut w = Vec::with_capacity(p.k_gen + 1);
    w.push(w0);
    for _ in 0..p.k_gen {
        let wk = crm::sample_wk_prior(&w[0], rng);
        w.push(wk);
    }
    ModelDraw { pi: gem.pi, w }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOutput {
    pub multigraph: MultiGraph,
    /// Edge draws with at least one endpoint in the slack slot.
    pub slack_edges: u64,
    pub total_edges: u64,
    pub lambda: f64,
}

/// Total-count construction: `n ~ Poisson(λ)`, a cluster per edge, then both
/// endpoints from the cluster's normalized weights.
pub fn generate_from<R: Rng + ?Sized>(draw: &ModelDraw, rng: &mut R) -> GenOutput {
    let lambda = draw.lambda();
    let num_nodes = draw.num_nodes();
    let mut mg = MultiGraph::new(num_nodes);
    let n = dist::poisson(lambda, rng);
    let mut slack_edges = 0;
    if n > 0 {
        let cluster_mass: Vec<f64> = draw
            .pi
            .iter()
            .zip(&draw.w)
            .map(|(p, w)| p * w.total() * w.total())
            .collect();
        let pick = WeightedIndex::new(&cluster_mass).expect("positive cluster mass");
        let mut per_cluster = vec![0u64; cluster_mass.len()];
        for _ in 0..n {
            per_cluster[pick.sample(rng)] += 1;
        }
        for (k, &count) in per_cluster.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let ends = WeightedIndex::new(draw.w[k].as_slice()).expect("positive weights");
            for _ in 0..count {
                let a = ends.sample(rng);
                let b = ends.sample(rng);
                if a == 0 || b == 0 {
                    slack_edges += 1;
                } else {
                    mg.add(a - 1, b - 1, 1);
                }
            }
        }
    }
    GenOutput {
        multigraph: mg,
        slack_edges,
        total_edges: n,
        lambda,
    }
}

/// Pair-by-pair construction: independent Poisson multiplicities with the
/// folded rates. Quadratic, so limited to small graphs.
pub fn generate_pairwise<R: Rng + ?Sized>(draw: &ModelDraw, rng: &mut R) -> Result<MultiGraph> {
    let n = draw.num_nodes();
    if n > PAIRWISE_MAX_NODES {
        return Err(Error::Domain(format!(
            "pairwise generation is limited to {PAIRWISE_MAX_NODES} nodes, got {n}"
        )));
    }
    let mut mg = MultiGraph::new(n);
    for i in 0..n {
        for j in i..n {
            let m = dist::poisson(draw.pair_rate(i, j), rng);
            mg.add(i, j, m as u32);
        }
    }
    Ok(mg)
}

pub fn generate_multigraph<R: Rng + ?Sized>(p: &GenParams, rng: &mut R) -> GenOutput {
    let draw = sample_model(p, rng);
    generate_from(&draw, rng)
}

pub fn generate_simple<R: Rng + ?Sized>(p: &GenParams, rng: &mut R) -> SimpleGraph {
    collapse(&generate_multigraph(p, rng).multigraph)
}

/// Uniform random simple graph with exactly `m` edges.
pub fn gnm<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<SimpleGraph> {
    let max = n * n.saturating_sub(1) / 2;
    if m > max {
        return Err(Error::Domain(format!("{m} edges do not fit in {n} nodes")));
    }
    let mut set = std::collections::BTreeSet::new();
    while set.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    Ok(SimpleGraph::from_sorted_unique(
        n,
        set.into_iter().collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPoint {
    pub kappa_mass: f64,
    pub mean_active_nodes: f64,
    pub mean_edges: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityFit {
    /// Least-squares slope of `log |E|` on `log |V_active|`.
    pub slope: f64,
    pub points: Vec<SparsityPoint>,
    /// The size parameter driven along the grid.
    pub growth_knob: &'static str,
}

/// Grows graphs along `kappa_grid` (other parameters from `p`) and fits the
/// log-log slope of edges against active nodes. Replicates run in parallel,
/// each on its own rng stream.
pub fn sparsity_bench(p: &GenParams, kappa_grid: &[f64], reps: usize) -> Result<SparsityFit> {
    if kappa_grid.len() < 3 || reps < 5 {
        return Err(Error::Domain(
            "sparsity bench needs at least 3 grid points and 5 replicates".into(),
        ));
    }
    let lo = kappa_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kappa_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateFit("kappa grid is constant".into()));
    }
    let mut points = Vec::with_capacity(kappa_grid.len());
    for (gi, &kappa) in kappa_grid.iter().enumerate() {
        let params = GenParams {
            kappa_mass: kappa,
            ..p.clone()
        };
        params.validate()?;
        let sizes: Vec<(usize, usize)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(p.seed, (gi * reps + r) as u64);
                let g = generate_simple(&params, &mut rng);
                (g.num_active_nodes(), g.num_edges())
            })
            .collect();
        if sizes.iter().any(|&(_, e)| e == 0) {
            return Err(Error::DegenerateFit(format!(
                "empty graph generated at kappa_mass = {kappa}"
            )));
        }
        let r = reps as f64;
        points.push(SparsityPoint {
            kappa_mass: kappa,
            mean_active_nodes: sizes.iter().map(|s| s.0 as f64).sum::<f64>() / r,
            mean_edges: sizes.iter().map(|s| s.1 as f64).sum::<f64>() / r,
        });
    }
    let xs: Vec<f64> = points.iter().map(|q| q.mean_active_nodes.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|q| q.mean_edges.ln()).collect();
    let slope = ls_slope(&xs, &ys)?;
    Ok(SparsityFit {
        slope,
        points,
        growth_knob: "kappa_mass",
    })
}

/// Ordinary least-squares slope; fails when the abscissae do not vary.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-12 * n) {
        return Err(Error::DegenerateFit("abscissae do not vary".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crm::CrmWeights;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn params(kappa: f64, n: usize) -> GenParams {
        GenParams {
            alpha_dp: 1.0,
            kappa_mass: kappa,
            k_gen: 10,
            num_nodes: n,
            seed: 1,
        }
    }

    fn frozen() -> ModelDraw {
        let w = |v: Vec<f64>| CrmWeights::from_vec(v).unwrap();
        ModelDraw {
            pi: vec![0.0, 0.6, 0.4],
            w: vec![
                w(vec![0.5, 0.3, 0.2, 0.4, 0.1, 0.2]),
                w(vec![0.2, 0.9, 0.1, 0.5, 0.05, 0.3]),
                w(vec![0.4, 0.1, 0.7, 0.2, 0.6, 0.15]),
            ],
        }
    }

    #[test]
    fn lambda_single_cluster() {
        let draw = ModelDraw {
            pi: vec![0.0, 1.0],
            w: vec![
                CrmWeights::from_vec(vec![1.0, 1.0]).unwrap(),
                CrmWeights::from_vec(vec![1.5, 0.5]).unwrap(),
            ],
        };
        assert!((draw.lambda() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn observed_multiplicity_is_poisson_thinned() {
        let draw = frozen();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = 10_000;
        let totals: Vec<f64> = (0..reps)
            .map(|_| {
                generate_from(&draw, &mut rng)
                    .multigraph
                    .total_multiplicity() as f64
            })
            .collect();
        let mean = totals.iter().sum::<f64>() / reps as f64;
        let expect = draw.expected_observed_multiplicity();
        // Poisson: variance equals the mean
        let se = (expect / reps as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let p = params(20.0, 50);
        let a = generate_multigraph(&p, &mut ChaCha8Rng::seed_from_u64(7));
        let b = generate_multigraph(&p, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn diagonal_only_collapses_to_empty() {
        let mut mg = MultiGraph::new(3);
        mg.add(0, 0, 4);
        mg.add(2, 2, 1);
        assert_eq!(collapse(&mg).num_edges(), 0);
    }

    #[test]
    fn generated_graphs_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let g = generate_simple(&params(30.0, 100), &mut rng);
            assert!(SimpleGraph::from_edges(g.num_nodes(), g.edges().iter().copied()).is_ok());
        }
    }

    fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
        let stat: f64 = observed
            .iter()
            .zip(expected)
            .map(|(o, e)| (o - e) * (o - e) / e)
            .sum();
        let dof = (observed.len() - 1) as f64;
        1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
    }

    /// Bins `{0, 1, 2, 3+}` of a Poisson law.
    fn poisson_bins(rate: f64, n: f64) -> [f64; 4] {
        let p: Vec<f64> = (0..3)
            .map(|k| dist::ln_poisson_pmf(k, rate).exp())
            .collect();
        [p[0] * n, p[1] * n, p[2] * n, (1.0 - p[0] - p[1] - p[2]) * n]
    }

    #[test]
    fn both_constructions_match_folded_poisson_rates() {
        let draw = frozen();
        let n = 100_000;
        let v = draw.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut hist_total = vec![[0f64; 4]; v * v];
        let mut hist_pair = vec![[0f64; 4]; v * v];
        for _ in 0..n {
            let a = generate_from(&draw, &mut rng).multigraph;
            let b = generate_pairwise(&draw, &mut rng).unwrap();
            for i in 0..v {
                for j in i..v {
                    hist_total[i * v + j][a.get(i, j).min(3) as usize] += 1.0;
                    hist_pair[i * v + j][b.get(i, j).min(3) as usize] += 1.0;
                }
            }
        }
        let mut worst = 1.0f64;
        for i in 0..v {
            for j in i..v {
                let exp = poisson_bins(draw.pair_rate(i, j), n as f64);
                // merge sparse tail bins for the test's validity
                let keep = exp.iter().take_while(|&&e| e >= 5.0).count().max(2);
                let fold = |h: &[f64; 4]| {
                    let mut o: Vec<f64> = h[..keep - 1].to_vec();
                    o.push(h[keep - 1..].iter().sum());
                    o
                };
                let e = fold(&exp);
                worst = worst
                    .min(chi_square_p(&fold(&hist_total[i * v + j]), &e))
                    .min(chi_square_p(&fold(&hist_pair[i * v + j]), &e));
            }
        }
        // 30 tests; Bonferroni at 0.001 overall
        assert!(worst > 0.001 / 30.0, "min p-value {worst}");
    }

    #[test]
    fn expected_multiplicity_grows_with_kappa() {
        let grid = [2.0, 5.0, 10.0, 20.0];
        let reps = 400;
        let mut prev: Option<(f64, f64)> = None;
        for (g, &kappa) in grid.iter().enumerate() {
            let p = params(kappa, 30);
            let totals: Vec<f64> = (0..reps)
                .map(|r| {
                    let mut rng = stream_rng(11, (g * reps + r) as u64);
                    generate_multigraph(&p, &mut rng)
                        .multigraph
                        .total_multiplicity() as f64
                })
                .collect();
            let mean = totals.iter().sum::<f64>() / reps as f64;
            let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            if let Some((pm, pse)) = prev {
                assert!(
                    mean + 3.0 * (se * se + pse * pse).sqrt() >= pm,
                    "{kappa}: {mean} < {pm}"
                );
            }
            prev = Some((mean, se));
        }
    }

    #[test]
    fn degree_distribution_is_heavy_tailed() {
        fn ratio(g: &SimpleGraph) -> f64 {
            let deg: Vec<usize> = g.degrees().into_iter().filter(|&d| d > 0).collect();
            let mean = deg.iter().sum::<usize>() as f64 / deg.len() as f64;
            *deg.iter().max().unwrap() as f64 / mean
        }
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0);
            let g = generate_simple(&params(300.0, 20_000), &mut rng);
            let r = ratio(&g);
            // a uniform random graph on the same active nodes and edge count
            let er = gnm(g.num_active_nodes(), g.num_edges(), &mut rng).unwrap();
            assert!(r > ratio(&er), "seed {seed}: {r} vs {}", ratio(&er));
            ratios.push(r);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(mean > 5.0, "mean max/mean degree ratio {mean}");
    }

    #[test]
    fn degenerate_grid_is_reported() {
        let p = params(10.0, 100);
        assert!(matches!(
            sparsity_bench(&p, &[10.0, 10.0, 10.0], 5),
            Err(Error::DegenerateFit(_))
        ));
        assert!(sparsity_bench(&p, &[10.0, 20.0], 5).is_err());
        assert!(ls_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 2.0 < 1e-12);
    }

    #[test]
    fn gnm_has_requested_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = gnm(50, 100, &mut rng).unwrap();
        assert_eq!(g.num_edges(), 100);
        assert!(gnm(3, 4, &mut rng).is_err());
    }
}
