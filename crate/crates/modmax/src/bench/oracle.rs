//! Dense reference computations used to validate the matrix-free paths.
//!
//! Everything here builds matrices directly from edge data or clique algebra,
//! independently of [`crate::graph::ModularityOperator`], so tests comparing
//! the two genuinely exercise different routes. None of it is used by the
//! solver.

use nalgebra::{DMatrix, DVector};

use crate::bench::BenchError;
use crate::graph::Graph;
use crate::partition::Partition;

/// Dense modularity matrix `A − d dᵀ/2m` assembled straight from the edges.
pub fn dense_modularity(graph: &Graph) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut a = DMatrix::zeros(n, n);
    for (u, v) in graph.edges() {
        a[(u as usize, v as usize)] = 1.0;
        a[(v as usize, u as usize)] = 1.0;
    }
    dense_modularity_from_adjacency(&a)
}

/// Dense modularity matrix of an arbitrary symmetric adjacency.
pub fn dense_modularity_from_adjacency(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let ones = DVector::from_element(n, 1.0);
    let d = a * &ones;
    let two_m = d.sum();
    a - &d * d.transpose() / two_m
}

/// The with-diagonal ideal adjacency `Z Zᵀ` of disjoint cliques: block
/// diagonal of all-ones blocks, unit diagonal included.
pub fn ideal_dense_adjacency(sizes: &[usize]) -> DMatrix<f64> {
    let n: usize = sizes.iter().sum();
    let mut a = DMatrix::zeros(n, n);
    let mut offset = 0;
    for &s in sizes {
        for i in 0..s {
            for j in 0..s {
                a[(offset + i, offset + j)] = 1.0;
            }
        }
        offset += s;
    }
    a
}

/// Closed-form value of the modularity quadratic at the planted assignment of
/// a with-diagonal ideal graph: `Σnᵢ² − Σnᵢ⁴ / Σnᵢ²`.
pub fn ideal_assignment_value(sizes: &[usize]) -> f64 {
    let sq: f64 = sizes.iter().map(|&s| (s * s) as f64).sum();
    let quart: f64 = sizes.iter().map(|&s| ((s * s) * (s * s)) as f64).sum();
    sq - quart / sq
}

/// Value of the quadratic at the *column-normalized* planted assignment,
/// `Σnᵢ − Σnᵢ³ / Σnᵢ²`. The normalized frame has unit columns, so this also
/// equals the sum of the q−1 nonzero eigenvalues of the with-diagonal ideal
/// modularity matrix (its trace).
pub fn ideal_normalized_value(sizes: &[usize]) -> f64 {
    let lin: f64 = sizes.iter().map(|&s| s as f64).sum();
    let sq: f64 = sizes.iter().map(|&s| (s * s) as f64).sum();
    let cube: f64 = sizes.iter().map(|&s| (s * s * s) as f64).sum();
    lin - cube / sq
}

/// Exhaustive maximization of `tr(XᵀMX)` over surjective `q`-labelings of the
/// rows of a symmetric adjacency, up to label permutation (restricted-growth
/// enumeration). Community aggregates are maintained incrementally, so each
/// enumeration step costs `O(n)`.
pub fn brute_force_on_adjacency(
    a: &DMatrix<f64>,
    q: usize,
) -> Result<(Partition, f64), BenchError> {
    let n = a.nrows();
    if q == 0 || n == 0 {
        return Err(BenchError::TooFewCommunities);
    }
    if (q as f64).powi(n as i32) > 1e7 {
        return Err(BenchError::InstanceTooLarge { q, n });
    }
    let ones = DVector::from_element(n, 1.0);
    let degree = a * &ones;
    let two_m = degree.sum();

    struct Search<'s> {
        a: &'s DMatrix<f64>,
        degree: &'s DVector<f64>,
        two_m: f64,
        n: usize,
        q: usize,
        labels: Vec<u32>,
        internal: Vec<f64>,
        degree_sum: Vec<f64>,
        best: Option<(Vec<u32>, f64)>,
    }

    impl Search<'_> {
        fn objective(&self, used: usize) -> f64 {
            (0..used)
                .map(|c| self.internal[c] - self.degree_sum[c] * self.degree_sum[c] / self.two_m)
                .sum()
        }

        fn descend(&mut self, node: usize, used: usize) {
            if node == self.n {
                if used == self.q {
                    let value = self.objective(used);
                    let better = match &self.best {
                        None => true,
                        Some((_, best_value)) => value > *best_value,
                    };
                    if better {
                        self.best = Some((self.labels.clone(), value));
                    }
                }
                return;
            }
            // prune: remaining nodes cannot open enough new labels
            if used + (self.n - node) < self.q {
                return;
            }
            let limit = (used + 1).min(self.q);
            for c in 0..limit {
                let mut cross = 0.0;
                for prev in 0..node {
                    if self.labels[prev] == c as u32 {
                        cross += self.a[(prev, node)];
                    }
                }
                let delta_internal = 2.0 * cross + self.a[(node, node)];
                self.labels[node] = c as u32;
                self.internal[c] += delta_internal;
                self.degree_sum[c] += self.degree[node];
                self.descend(node + 1, used.max(c + 1));
                self.internal[c] -= delta_internal;
                self.degree_sum[c] -= self.degree[node];
            }
        }
    }

    let mut search = Search {
        a,
        degree: &degree,
        two_m,
        n,
        q,
        labels: vec![0; n],
        internal: vec![0.0; q],
        degree_sum: vec![0.0; q],
        best: None,
    };
    search.descend(0, 0);
    let (labels, value) = search.best.ok_or(BenchError::TooFewCommunities)?;
    Ok((Partition::from_labels(labels).expect("nonempty"), value))
}
