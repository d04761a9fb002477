//! Observed simple graphs and latent multigraphs.
//!
//! Node ids are dense integers `0..num_nodes`. Unordered pairs are always
//! stored canonically as `(min, max)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Undirected, loop-free graph with a symmetric CSR adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    num_nodes: usize,
    /// Sorted unordered pairs with `i < j`.
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl SimpleGraph {
    /// Builds a graph from unordered pairs, rejecting self-loops, repeated
    /// pairs (in either orientation) and out-of-range endpoints.
    pub fn from_edges<I>(num_nodes: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            for v in [a, b] {
                if v >= num_nodes {
                    return Err(Error::Index {
                        index: v,
                        num_nodes,
                    });
                }
            }
            if a == b {
                return Err(Error::Validation {
                    msg: format!("self-loop on node {a}"),
                    lines: Vec::new(),
                });
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation {
                msg: format!("duplicate edge {:?}", w[0]),
                lines: Vec::new(),
            });
        }
        Ok(Self::from_sorted_unique(num_nodes, edges))
    }

    /// Caller guarantees `edges` is sorted, unique, in range and loop-free.
    pub(crate) fn from_sorted_unique(num_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut degree = vec![0usize; num_nodes];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        for &(i, j) in &edges {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        for v in 0..num_nodes {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self {
            num_nodes,
            edges,
            offsets,
            neighbors,
        }
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self::from_sorted_unique(num_nodes, Vec::new())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of unordered edges.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of stored CSR entries, `2 |E|`.
    pub fn num_directed_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        if i >= self.num_nodes {
            return Err(Error::Index {
                index: i,
                num_nodes: self.num_nodes,
            });
        }
        Ok(self.offsets[i + 1] - self.offsets[i])
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `2 |E| / |V|`, zero for the null graph.
    pub fn mean_degree(&self) -> f64 {
        if self.num_nodes == 0 {
            0.0
        } else {
            self.num_directed_edges() as f64 / self.num_nodes as f64
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.num_nodes && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Nodes with at least one incident edge.
    pub fn num_active_nodes(&self) -> usize {
        self.degrees().iter().filter(|&&d| d > 0).count()
    }

    /// Multigraph with every edge at multiplicity one and `self_loops` loops
    /// on each node (zero means no diagonal entries).
    pub fn to_multigraph(&self, self_loops: u32) -> MultiGraph {
        let mut mg = MultiGraph::new(self.num_nodes);
        for &(i, j) in &self.edges {
            mg.add(i, j, 1);
        }
        if self_loops > 0 {
            for i in 0..self.num_nodes {
                mg.add(i, i, self_loops);
            }
        }
        mg
    }
}

/// Integer multiplicities over unordered node pairs, diagonal included.
/// Diagonal entries count self-loops. Zero entries are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MultiGraph {
    num_nodes: usize,
    mult: BTreeMap<(usize, usize), u32>,
}

impl MultiGraph {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            mult: BTreeMap::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Adds `count` copies of pair `{i, j}`. Panics on out-of-range nodes.
    pub fn add(&mut self, i: usize, j: usize, count: u32) {
        assert!(
            i < self.num_nodes && j < self.num_nodes,
            "node out of range"
        );
        if count == 0 {
            return;
        }
        *self.mult.entry((i.min(j), i.max(j))).or_insert(0) += count;
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.mult.get(&(i.min(j), i.max(j))).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.mult.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.mult.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.mult.values().map(|&v| v as u64).sum()
    }

    pub fn collapse(&self) -> SimpleGraph {
        collapse(self)
    }

    pub fn to_weights(&self) -> MultiplicityMap {
        let mut out = MultiplicityMap::new(self.num_nodes);
        for ((i, j), m) in self.iter() {
            out.set(i, j, m as f64);
        }
        out
    }
}

/// Drops diagonal entries and turns every remaining pair into a unit edge.
pub fn collapse(mg: &MultiGraph) -> SimpleGraph {
    let edges: Vec<_> = mg.mult.keys().copied().filter(|&(i, j)| i != j).collect();
    // BTreeMap keys are already sorted and unique.
    SimpleGraph::from_sorted_unique(mg.num_nodes, edges)
}

/// Real-valued multiplicities over unordered pairs (diagonal included), e.g.
/// posterior means. Non-positive values are not stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiplicityMap {
    num_nodes: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl MultiplicityMap {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            entries: BTreeMap::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            i < self.num_nodes && j < self.num_nodes,
            "node out of range"
        );
        let key = (i.min(j), i.max(j));
        if value > 0.0 {
            self.entries.insert(key, value);
        } else {
            self.entries.remove(&key);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self::new(self.num_nodes);
        for (k, v) in self.iter() {
            out.set(k.0, k.1, v * c);
        }
        out
    }
}
