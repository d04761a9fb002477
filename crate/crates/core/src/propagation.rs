//! Symmetric-normalized propagation operators and their application.
//!
//! Both builders emit entries as `a_ij * (s_i * s_j)` with `s = 1/sqrt(degree)`
//! evaluated the same way, so a multigraph with unit edges and unit
//! self-loops yields an operator bit-identical to the self-loop-augmented
//! simple graph's.

use crate::error::{Error, Result};
use crate::graph::{MultiplicityMap, SimpleGraph};
use crate::linalg::{CsrMatrix, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `(D+I)^{-1/2} (A+I) (D+I)^{-1/2}` of the observed graph.
    PTilde,
    /// `D̂^{-1/2} Â D̂^{-1/2}` of the virtual multigraph.
    PHat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    pub matrix: CsrMatrix,
    pub kind: OperatorKind,
}

impl PropagationMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

fn inv_sqrt(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d.sqrt()
    } else {
        0.0
    }
}

pub fn build_p_tilde(g: &SimpleGraph) -> PropagationMatrix {
    let n = g.num_nodes();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let d = g.neighbors(i).iter().fold(1.0, |acc, _| acc + 1.0);
            inv_sqrt(d)
        })
        .collect();
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(g.neighbors(i).len() + 1);
            row.push((i, 1.0 * (s[i] * s[i])));
            row.extend(g.neighbors(i).iter().map(|&j| (j, 1.0 * (s[i] * s[j]))));
            row
        })
        .collect();
    PropagationMatrix {
        matrix: CsrMatrix::from_rows(rows),
        kind: OperatorKind::PTilde,
    }
}

/// Operator of a (possibly real-valued) multiplicity map; diagonal entries
/// are self-loop counts and enter the degree once. Nodes of zero degree get
/// empty rows and columns.
pub fn build_p_hat(mg: &MultiplicityMap) -> PropagationMatrix {
    let n = mg.num_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((i, j), v) in mg.iter() {
        rows[i].push((j, v));
        if i != j {
            rows[j].push((i, v));
        }
    }
    for row in rows.iter_mut() {
        row.sort_by_key(|&(c, _)| c);
    }
    let s: Vec<f64> = rows
        .iter()
        .map(|row| inv_sqrt(row.iter().fold(0.0, |acc, &(_, v)| acc + v)))
        .collect();
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .map(|(j, v)| (j, v * (s[i] * s[j])))
                .collect()
        })
        .collect();
    PropagationMatrix {
        matrix: CsrMatrix::from_rows(rows),
        kind: OperatorKind::PHat,
    }
}

/// `P^steps H`.
pub fn propagate(p: &PropagationMatrix, h: &DenseMatrix, steps: usize) -> Result<DenseMatrix> {
    check_rows(p, h)?;
    let mut out = h.clone();
    for _ in 0..steps {
        out = p.matrix.mul_dense(&out)?;
    }
    Ok(out)
}

/// `L` steps of `H ← (1 - α) P H + α H0` starting from `H0`.
pub fn appnp_propagate(
    p: &PropagationMatrix,
    h0: &DenseMatrix,
    teleport_alpha: f64,
    layers: usize,
) -> Result<DenseMatrix> {
    if !(teleport_alpha > 0.0 && teleport_alpha < 1.0) {
        return Err(Error::Domain(format!(
            "teleport_alpha must lie in (0, 1), got {teleport_alpha}"
        )));
    }
    check_rows(p, h0)?;
    let mut h = h0.clone();
    for _ in 0..layers {
        let mut next = p.matrix.mul_dense(&h)?;
        for (o, &x0) in next.as_mut_slice().iter_mut().zip(h0.as_slice()) {
            *o = (1.0 - teleport_alpha) * *o + teleport_alpha * x0;
        }
        h = next;
    }
    Ok(h)
}

fn check_rows(p: &PropagationMatrix, h: &DenseMatrix) -> Result<()> {
    if h.rows() != p.dim() {
        return Err(Error::Dimension(format!(
            "operator has {} rows, input has {}",
            p.dim(),
            h.rows()
        )));
    }
    Ok(())
}

/// Largest absolute eigenvalue estimate by power iteration.
pub fn spectral_radius(p: &PropagationMatrix, iters: usize) -> f64 {
    let n = p.dim();
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let y = p.matrix.mul_vec(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiGraph;
    use proptest::prelude::*;

    fn dense(p: &PropagationMatrix) -> DenseMatrix {
        p.matrix.to_dense()
    }

    #[test]
    fn two_node_path_and_isolated_node() {
        let g = SimpleGraph::from_edges(3, [(0, 1)]).unwrap();
        let p = build_p_tilde(&g);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((p.get(i, j) - 0.5).abs() < 1e-15);
        }
        assert_eq!(p.get(2, 2), 1.0);
    }

    #[test]
    fn regular_graph_rows_sum_to_one() {
        let cycle = SimpleGraph::from_edges(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
        let p = build_p_tilde(&cycle);
        for s in p.matrix.mul_vec(&[1.0; 6]) {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_multigraph_reproduces_p_tilde_exactly() {
        let g = SimpleGraph::from_edges(5, [(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let mg = g.to_multigraph(1).to_weights();
        assert_eq!(build_p_hat(&mg).matrix, build_p_tilde(&g).matrix);
    }

    #[test]
    fn hand_computed_p_hat() {
        let mut mg = MultiGraph::new(1);
        mg.add(0, 0, 5);
        assert!((build_p_hat(&mg.to_weights()).get(0, 0) - 1.0).abs() < 1e-15);

        let mut m = MultiplicityMap::new(2);
        m.set(0, 1, 2.0);
        m.set(0, 0, 2.0);
        let p = build_p_hat(&m);
        assert!((p.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((p.get(0, 1) - 2.0 / 8f64.sqrt()).abs() < 1e-15);
        assert!((p.get(1, 0) - 2.0 / 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.get(1, 1), 0.0);
    }

    #[test]
    fn zero_degree_rows_are_empty() {
        let mut m = MultiplicityMap::new(3);
        m.set(0, 1, 1.0);
        let p = build_p_hat(&m);
        assert_eq!(p.matrix.row(2).count(), 0);
    }

    #[test]
    fn propagation_identities() {
        let g = SimpleGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let p = build_p_tilde(&g);
        let h = DenseMatrix::from_vec(4, 2, vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        assert_eq!(propagate(&p, &h, 0).unwrap(), h);
        let two = propagate(&p, &h, 2).unwrap();
        let twice = propagate(&p, &propagate(&p, &h, 1).unwrap(), 1).unwrap();
        assert!(two.max_abs_diff(&twice) < 1e-10);

        let iso = build_p_tilde(&SimpleGraph::empty(4));
        assert_eq!(propagate(&iso, &h, 7).unwrap(), h);
        assert!(propagate(&p, &DenseMatrix::zeros(3, 1), 1).is_err());
    }

    #[test]
    fn appnp_limits() {
        let g = SimpleGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let p = build_p_tilde(&g);
        let h0 = DenseMatrix::from_vec(4, 1, vec![1., -2., 0.5, 3.]).unwrap();
        assert_eq!(appnp_propagate(&p, &h0, 0.1, 0).unwrap(), h0);
        let near_one = appnp_propagate(&p, &h0, 1.0 - 1e-9, 10).unwrap();
        assert!(near_one.max_abs_diff(&h0) < 1e-6);
        assert!(appnp_propagate(&p, &h0, 1.0, 1).is_err());

        // α (I - (1-α) P)^{-1} H0 by Gaussian elimination
        let alpha = 0.1;
        let n = 4;
        let pd = dense(&p);
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = if i == j { 1.0 } else { 0.0 } - (1.0 - alpha) * pd.get(i, j);
            }
            a[i][n] = alpha * h0.get(i, 0);
        }
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
                .unwrap();
            a.swap(c, piv);
            for r in 0..n {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        let exact: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
        let h = appnp_propagate(&p, &h0, alpha, 500).unwrap();
        for i in 0..n {
            assert!((h.get(i, 0) - exact[i]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn p_hat_is_scale_invariant_symmetric_and_contracting(
            entries in proptest::collection::vec((0usize..20, 0usize..20, 0.1f64..5.0), 1..60),
            c in 0.01f64..100.0,
        ) {
            let mut m = MultiplicityMap::new(20);
            for &(i, j, v) in &entries {
                m.set(i, j, v);
            }
            let p = build_p_hat(&m);
            let q = build_p_hat(&m.scaled(c));
            let (pd, qd) = (dense(&p), dense(&q));
            prop_assert!(pd.max_abs_diff(&qd) < 1e-12);
            for i in 0..20 {
                for j in 0..20 {
                    prop_assert_eq!(pd.get(i, j), pd.get(j, i));
                    prop_assert!(pd.get(i, j) >= 0.0);
                }
            }
            prop_assert!(spectral_radius(&p, 500) <= 1.0 + 1e-9);
        }
    }
}
