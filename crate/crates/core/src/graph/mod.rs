//! Skeleton topologies and the (bin, joint) feature graph.
//!
//! Nodes are indexed bin-major: node `(b, i)` lives at `b * N + i`. Edges come
//! in two families: skeleton edges repeated in every bin, and a chain linking
//! consecutive bins of the same joint.

mod topology;

pub use topology::{SkeletonTopology, PRESETS};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SparseRows};

#[derive(Debug, Clone)]
pub struct FeatureGraph {
    num_bins: usize,
    num_joints: usize,
    adjacency: Matrix,
    normalized: Matrix,
    propagation: SparseRows,
}

impl FeatureGraph {
    pub fn build(topology: &SkeletonTopology, num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::contract("feature graph needs at least one bin"));
        }
        let n = topology.num_joints;
        let size = num_bins * n;
        let mut adjacency = Matrix::zeros(size, size);
        let mut link = |u: usize, v: usize| {
            adjacency[(u, v)] = 1.0;
            adjacency[(v, u)] = 1.0;
        };
        for b in 0..num_bins {
            for &(i, j) in &topology.edges {
                link(b * n + i, b * n + j);
            }
        }
        for b in 0..num_bins - 1 {
            for i in 0..n {
                link(b * n + i, (b + 1) * n + i);
            }
        }
        let normalized = normalize_adjacency(&adjacency)?;
        let propagation = SparseRows::from_dense(&normalized);
        Ok(FeatureGraph {
            num_bins,
            num_joints: n,
            adjacency,
            normalized,
            propagation,
        })
    }

    /// Node count `L = B * N`.
    pub fn num_nodes(&self) -> usize {
        self.num_bins * self.num_joints
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    #[inline]
    pub fn node_index(&self, bin: usize, joint: usize) -> usize {
        debug_assert!(bin < self.num_bins && joint < self.num_joints);
        bin * self.num_joints + joint
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
    pub fn normalized(&self) -> &Matrix {
        &self.normalized
    }

    pub(crate) fn propagation(&self) -> &SparseRows {
        &self.propagation
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        let l = self.num_nodes();
        (0..l)
            .map(|u| (u + 1..l).filter(|&v| self.adjacency[(u, v)] != 0.0).count())
            .sum()
    }

    pub fn is_connected(&self) -> bool {
        let l = self.num_nodes();
        let mut seen = vec![false; l];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..l {
                if self.adjacency[(u, v)] != 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Symmetric normalization with self-loops. Every degree is at least one
/// after adding the identity, so the inverse square roots always exist.
pub fn normalize_adjacency(adjacency: &Matrix) -> Result<Matrix> {
    let (rows, cols) = adjacency.shape();
    if rows != cols {
        return Err(Error::contract(format!("adjacency is {rows}x{cols}, not square")));
    }
    for r in 0..rows {
        if adjacency[(r, r)] != 0.0 {
            return Err(Error::contract(format!("adjacency has nonzero diagonal at {r}")));
        }
        for c in r + 1..cols {
            if adjacency[(r, c)] != adjacency[(c, r)] {
                return Err(Error::contract(format!("adjacency asymmetric at ({r}, {c})")));
            }
        }
    }
    let inv_sqrt_degree: Vec<f64> = (0..rows)
        .map(|r| 1.0 / (1.0 + adjacency.row(r).iter().sum::<f64>()).sqrt())
        .collect();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let a = adjacency[(r, c)] + if r == c { 1.0 } else { 0.0 };
            if a != 0.0 {
                out[(r, c)] = inv_sqrt_degree[r] * a * inv_sqrt_degree[c];
            }
        }
    }
    Ok(out)
}

/// Largest absolute eigenvalue estimated by power iteration from a nearly uniform start.
pub fn spectral_radius(m: &Matrix, iterations: usize) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    // A slightly uneven start avoids being orthogonal to the dominant eigenvector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * i as f64).collect();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let next: Vec<f64> = (0..n).map(|r| crate::linalg::dot(m.row(r), &v)).collect();
        estimate = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = next;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy5_single_bin_has_only_skeleton_edges() {
        let t = SkeletonTopology::builtin("toy5").unwrap();
        let g = FeatureGraph::build(&t, 1).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.num_edges(), 4);
    }

    #[test]
    fn toy5_three_bins_counts_both_families() {
        let t = SkeletonTopology::builtin("toy5").unwrap();
        let g = FeatureGraph::build(&t, 3).unwrap();
        assert_eq!(g.num_nodes(), 15);
        assert_eq!(g.num_edges(), 3 * 4 + 5 * 2);
        assert!(g.is_connected());
    }

    #[test]
    fn two_bins_give_one_inter_bin_neighbor() {
        let t = SkeletonTopology::builtin("coco18").unwrap();
        let g = FeatureGraph::build(&t, 2).unwrap();
        for b in 0..2 {
            for i in 0..t.num_joints {
                let u = g.node_index(b, i);
                let cross = (0..t.num_joints)
                    .filter(|&j| g.adjacency()[(u, g.node_index(1 - b, j))] != 0.0)
                    .count();
                assert_eq!(cross, 1);
            }
        }
    }

    #[test]
    fn zero_bins_rejected() {
        let t = SkeletonTopology::builtin("toy5").unwrap();
        assert!(FeatureGraph::build(&t, 0).is_err());
    }

    #[test]
    fn normalize_single_node() {
        let out = normalize_adjacency(&Matrix::zeros(1, 1)).unwrap();
        assert_eq!(out.as_slice(), &[1.0]);
    }

    #[test]
    fn normalize_two_connected_nodes() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let out = normalize_adjacency(&a).unwrap();
        for v in out.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_path_of_three() {
        let a = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let out = normalize_adjacency(&a).unwrap();
        let diag = [out[(0, 0)], out[(1, 1)], out[(2, 2)]];
        for (got, want) in diag.iter().zip([0.5, 1.0 / 3.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((out[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(out[(0, 2)], 0.0);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_adjacency(&asym), Err(Error::Contract(_))));
        let diag = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_adjacency(&diag), Err(Error::Contract(_))));
    }

    #[test]
    fn normalized_radius_is_one_for_body25() {
        let t = SkeletonTopology::builtin("body25").unwrap();
        let g = FeatureGraph::build(&t, 4).unwrap();
        assert!(g.normalized().is_symmetric(0.0));
        let rho = spectral_radius(g.normalized(), 1000);
        assert!(rho <= 1.0 + 1e-9, "{rho}");
        assert!(rho > 0.99, "{rho}");
    }
}
