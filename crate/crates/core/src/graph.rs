//! Weighted digraphs, their Laplacians, and the normalized left null vector of the Laplacian.
//!
//! Node indices are zero-based here. An entry `a_ij > 0` of the adjacency matrix
//! means there is an edge `j → i`, so `j` is an in-neighbor of `i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    adjacency: DMatrix<f64>,
}

impl Digraph {
    /// Graph with `n` nodes and no edges.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        Ok(Self {
            adjacency: DMatrix::zeros(n, n),
        })
    }

    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square and non-empty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidGraph(format!("weight a[{i}][{j}] = {a} must be finite and >= 0")));
                }
            }
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
            }
        }
        Ok(Self { adjacency })
    }

    /// Builds a graph from `(from, to, weight)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new(n)?;
        for &(from, to, w) in edges {
            g.add_edge(from, to, w)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) -> Result<()> {
        let n = self.node_count();
        if from >= n || to >= n {
            return Err(Error::InvalidGraph(format!("edge {from}->{to} out of range for {n} nodes")));
        }
        if from == to {
            return Err(Error::InvalidGraph(format!("self-loop on node {from}")));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidGraph(format!("edge {from}->{to} has weight {weight}, must be > 0")));
        }
        self.adjacency[(to, from)] = weight;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// In-neighbors of node `i` with their weights.
    pub fn in_neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.node_count())
            .filter_map(|j| {
                let a = self.adjacency[(i, j)];
                (a > 0.0).then_some((j, a))
            })
            .collect()
    }

    fn reaches_all(&self, forward: bool) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for other in 0..n {
                // forward: node -> other exists iff a[other][node] > 0
                let w = if forward {
                    self.adjacency[(other, node)]
                } else {
                    self.adjacency[(node, other)]
                };
                if w > 0.0 && !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A graph is strongly connected iff node 0 reaches every node and every node reaches node 0.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    g.reaches_all(true) && g.reaches_all(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    matrix: DMatrix<f64>,
    source: Digraph,
}

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source(&self) -> &Digraph {
        &self.source
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    /// `1ᵀL = 0`, up to `tol`.
    pub fn is_weight_balanced(&self, tol: f64) -> bool {
        self.matrix.row_sum().iter().all(|c| c.abs() <= tol)
    }
}

pub fn laplacian(g: &Digraph) -> Laplacian {
    let n = g.node_count();
    let a = g.adjacency();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = a.row(i).sum();
    }
    Laplacian {
        matrix: l,
        source: g.clone(),
    }
}

/// Relative singular-value threshold below which a direction counts as null.
pub const NULL_SPACE_TOL: f64 = 1e-8;

/// Positive left null vector `r` of `L` with `rᵀ1 = 1`.
///
/// Requires a strongly connected source graph; the null space of `Lᵀ` is then
/// one-dimensional and spanned by a positive vector.
pub fn left_eigenvector(lap: &Laplacian) -> Result<DVector<f64>> {
    if !is_strongly_connected(lap.source()) {
        return Err(Error::NotStronglyConnected);
    }
    let n = lap.node_count();
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let lt = lap.matrix().transpose();

    let sv = lt.clone().singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    let largest = s[n - 1];
    if s[0] > NULL_SPACE_TOL * largest || s[1] <= NULL_SPACE_TOL * largest {
        return Err(Error::NotStronglyConnected);
    }

    // Lᵀ has rank n-1; swap its last equation for the normalization Σ r_i = 1.
    let mut system = lt;
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let r = system
        .full_piv_lu()
        .solve(&rhs)
        .ok_or(Error::NotStronglyConnected)?;
    if r.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotStronglyConnected);
    }
    Ok(r)
}

/// The five-node network used in the reference example, with unit weights.
///
/// Edges (one-based): 3→1, 1→2, 2→3, 3→4, 4→5, 2→5, 5→1.
pub fn reference_network() -> Digraph {
    let edges = [(3, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 5), (5, 1)];
    let edges: Vec<_> = edges.iter().map(|&(f, t)| (f - 1, t - 1, 1.0)).collect();
    Digraph::from_edges(5, &edges).expect("reference network is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(n: usize) -> Digraph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Digraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let g = Digraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(laplacian(&g).matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        let l = laplacian(&reference_network());
        let row: Vec<f64> = l.matrix().row(0).iter().copied().collect();
        assert_eq!(row, vec![2.0, 0.0, -1.0, 0.0, -1.0]);

        let single = laplacian(&Digraph::new(1).unwrap());
        assert_eq!(single.matrix(), &DMatrix::zeros(1, 1));
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Digraph::new(0).is_err());
        let mut g = Digraph::new(2).unwrap();
        assert!(g.add_edge(0, 0, 1.0).is_err());
        assert!(g.add_edge(0, 1, 0.0).is_err());
        assert!(g.add_edge(0, 2, 1.0).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(Digraph::from_adjacency(a).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(Digraph::from_adjacency(a).is_err());
    }

    #[test]
    fn strong_connectivity_examples() {
        assert!(is_strongly_connected(&reference_network()));
        assert!(is_strongly_connected(&Digraph::new(1).unwrap()));
        let g = Digraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert!(!is_strongly_connected(&g));
    }

    #[test]
    fn reference_network_is_unbalanced() {
        assert!(!laplacian(&reference_network()).is_weight_balanced(1e-12));
        assert!(laplacian(&ring(4)).is_weight_balanced(1e-12));
    }

    #[test]
    fn left_eigenvector_examples() {
        let r = left_eigenvector(&laplacian(&ring(3))).unwrap();
        for x in r.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let r = left_eigenvector(&laplacian(&ring(2))).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-12);

        let r = left_eigenvector(&laplacian(&reference_network())).unwrap();
        let expected = [2.0, 4.0, 3.0, 1.0, 1.0].map(|x| x / 11.0);
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }

        let r = left_eigenvector(&laplacian(&Digraph::new(1).unwrap())).unwrap();
        assert_eq!(r.as_slice(), &[1.0]);
    }

    #[test]
    fn left_eigenvector_rejects_reducible_graph() {
        let g = Digraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(matches!(left_eigenvector(&laplacian(&g)), Err(Error::NotStronglyConnected)));
    }

    fn brute_force_strongly_connected(adj: &[Vec<bool>]) -> bool {
        // Floyd–Warshall transitive closure
        let n = adj.len();
        let mut reach = adj.to_vec();
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        reach.iter().all(|row| row.iter().all(|&x| x))
    }

    fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (1usize..=8).prop_flat_map(|n| {
            let edge = (0..n, 0..n, 0.1f64..5.0);
            (Just(n), proptest::collection::vec(edge, 0..(3 * n)))
        })
    }

    proptest! {
        #[test]
        fn connectivity_matches_brute_force((n, edges) in arb_graph()) {
            let edges: Vec<_> = edges.into_iter().filter(|(f, t, _)| f != t).collect();
            let g = Digraph::from_edges(n, &edges).unwrap();
            // edge j -> i recorded as adj[j][i] = true for the closure
            let mut adj = vec![vec![false; n]; n];
            for &(f, t, _) in &edges {
                adj[f][t] = true;
            }
            prop_assert_eq!(is_strongly_connected(&g), brute_force_strongly_connected(&adj));
        }

        #[test]
        fn laplacian_rows_sum_to_zero((n, edges) in arb_graph()) {
            let edges: Vec<_> = edges.into_iter().filter(|(f, t, _)| f != t).collect();
            let g = Digraph::from_edges(n, &edges).unwrap();
            let l = laplacian(&g);
            let ones = DVector::from_element(n, 1.0);
            let l1 = l.matrix() * ones;
            prop_assert!(l1.iter().all(|x| x.abs() <= 1e-12));
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        prop_assert_eq!(l.matrix()[(i, j)], -g.adjacency()[(i, j)]);
                    }
                }
            }
            if is_strongly_connected(&g) {
                let r = left_eigenvector(&l).unwrap();
                let residual = (r.transpose() * l.matrix()).norm();
                prop_assert!(residual <= 1e-10, "residual {}", residual);
                prop_assert!((r.sum() - 1.0).abs() <= 1e-12);
                prop_assert!(r.iter().all(|&x| x > 0.0));
            }
        }
    }
}
