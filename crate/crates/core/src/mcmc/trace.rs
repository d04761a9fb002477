use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, MultiplicityMap};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub log_joint: f64,
    pub k: usize,
    pub hmc_accept: f64,
    pub mh_accept: f64,
    /// Mean number of edge endpoints per node in the virtual multigraph,
    /// `2 (Σ z_ij + Σ z_ii) / |V|`.
    pub mult_per_node: f64,
}

/// Multiplicities at one recorded epoch, aligned with the trace's edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub epoch: usize,
    pub z: Vec<u32>,
    pub z_self: Vec<u32>,
}

impl Snapshot {
    pub fn to_multigraph(&self, num_nodes: usize, edges: &[(usize, usize)]) -> MultiGraph {
        let mut mg = MultiGraph::new(num_nodes);
        for (&(i, j), &m) in edges.iter().zip(&self.z) {
            mg.add(i, j, m);
        }
        for (i, &m) in self.z_self.iter().enumerate() {
            mg.add(i, i, m);
        }
        mg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub epochs: Vec<EpochStats>,
    /// Thinned post-burn-in snapshots.
    pub snapshots: Vec<Snapshot>,
    pub burn_in: usize,
    pub thin: usize,
}

impl ChainTrace {
    pub fn snapshot_multigraphs(&self) -> Vec<MultiGraph> {
        self.snapshots
            .iter()
            .map(|s| s.to_multigraph(self.num_nodes, &self.edges))
            .collect()
    }
}

/// Mean multiplicity per observed edge and per node over the recorded
/// snapshots.
pub fn posterior_mean_multiplicity(trace: &ChainTrace) -> Result<MultiplicityMap> {
    if trace.snapshots.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = trace.snapshots.len() as f64;
    let mut z = vec![0u64; trace.edges.len()];
    let mut zs = vec![0u64; trace.num_nodes];
    for s in &trace.snapshots {
        for (acc, &v) in z.iter_mut().zip(&s.z) {
            *acc += v as u64;
        }
        for (acc, &v) in zs.iter_mut().zip(&s.z_self) {
            *acc += v as u64;
        }
    }
    let mut out = MultiplicityMap::new(trace.num_nodes);
    for (&(i, j), &s) in trace.edges.iter().zip(&z) {
        out.set(i, j, s as f64 / n);
    }
    for (i, &s) in zs.iter().enumerate() {
        out.set(i, i, s as f64 / n);
    }
    Ok(out)
}

pub fn trace_csv(trace: &ChainTrace) -> String {
    let mut out = String::from("epoch,log_joint,K,hmc_accept,mh_accept,mult_per_node\n");
    for e in &trace.epochs {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.epoch, e.log_joint, e.k, e.hmc_accept, e.mh_accept, e.mult_per_node
        )
        .unwrap();
    }
    out
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into
/// the end bins. Returns `(bin_lo, bin_hi, count)`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    assert!(bins >= 1 && hi > lo);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect()
}
