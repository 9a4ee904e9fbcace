//! Graph ingestion and the implicit modularity operator.
//!
//! The modularity matrix of an undirected simple graph with adjacency `A`,
//! degree vector `d = A·1` and `2m = 1ᵀA1` is
//!
//! ```text
//! M = A − d dᵀ / 2m
//! ```
//!
//! `M` is symmetric, satisfies `M·1 = 0`, and is never materialized here:
//! [`ModularityOperator`] applies it one sparse matvec plus a rank-one
//! correction at a time, which keeps a column application at `O(m + n)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::partition::Partition;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: expected exactly two node tokens, found {found}")]
    MalformedLine { line: usize, found: usize },
    #[error("line {line}: node 0 found in input declared one-based")]
    ZeroInOneBased { line: usize },
    #[error("edge list is empty")]
    EmptyGraph,
    #[error("dimension mismatch: operator is {expected}, input has {found} rows")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("partition labels {labels} nodes but the graph has {nodes}")]
    LabelCountMismatch { labels: usize, nodes: usize },
}

/// How node labels in an edge list are interpreted.
///
/// Labels are always densely remapped to internal ids `0..n-1`; numeric label
/// sets are remapped in ascending numeric order, anything else in order of
/// first appearance. The one-based variant additionally rejects a literal
/// node `0`, which catches mixed-convention files early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    #[default]
    Auto,
    OneBased,
    ZeroBased,
}

/// Undirected simple graph: no self-loops, no multi-edges, dense node ids.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    degrees: Vec<u32>,
    m: usize,
    labels: Vec<String>,
}

/// A parsed graph together with what the parser had to clean up.
#[derive(Debug)]
pub struct ParsedGraph {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

impl Graph {
    /// Builds a graph from deduplicated undirected edges over ids `0..n`.
    /// Self-loops and duplicates are dropped silently; generators use this.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut seen = std::collections::HashSet::new();
        let mut adj = vec![Vec::new(); n];
        let mut m = 0usize;
        for &(a, b) in edges {
            let (a, b) = (a as usize, b as usize);
            assert!(a < n && b < n, "edge endpoint out of range");
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                continue;
            }
            adj[a].push(b as u32);
            adj[b].push(a as u32);
            m += 1;
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let degrees = adj.iter().map(|l| l.len() as u32).collect();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Ok(Graph { adj, degrees, m, labels })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node] as usize
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Neighbors of `node` in ascending id order.
    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adj[node]
    }

    /// Original input label of an internal node id.
    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Edges as `(u, v)` pairs with `u < v`, ascending.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.m);
        for (u, nbrs) in self.adj.iter().enumerate() {
            for &v in nbrs {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    /// The node-label remap table, one `original<TAB>internal` pair per line.
    pub fn remap_table(&self) -> String {
        let mut out = String::new();
        for (i, lab) in self.labels.iter().enumerate() {
            out.push_str(lab);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses a whitespace-separated edge list.
///
/// Each non-comment line holds exactly two node tokens; `#` and `%` start
/// comments. Duplicate edges are collapsed and self-loops dropped, with both
/// counts reported. Node labels are densely remapped (see [`LabelMode`]).
pub fn parse_edge_list(text: &str, mode: LabelMode) -> Result<ParsedGraph, GraphError> {
    let mut raw_edges: Vec<(String, String)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let body = match line.find(['#', '%']) {
            Some(pos) => &line[..pos],
            None => line,
        };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(GraphError::MalformedLine { line: line_no, found: tokens.len() });
        }
        if mode == LabelMode::OneBased && (tokens[0] == "0" || tokens[1] == "0") {
            return Err(GraphError::ZeroInOneBased { line: line_no });
        }
        raw_edges.push((tokens[0].to_string(), tokens[1].to_string()));
    }
    if raw_edges.is_empty() {
        return Err(GraphError::EmptyGraph);
    }

    // Dense remap: ascending numeric order when every label parses as an
    // integer, otherwise first-appearance order.
    let mut uniq: Vec<&str> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (a, b) in &raw_edges {
        for t in [a.as_str(), b.as_str()] {
            if seen.insert(t) {
                uniq.push(t);
            }
        }
    }
    let all_numeric = uniq.iter().all(|t| t.parse::<i64>().is_ok());
    if all_numeric {
        uniq.sort_by_key(|t| t.parse::<i64>().unwrap());
    }
    let index: std::collections::HashMap<&str, u32> =
        uniq.iter().enumerate().map(|(i, &t)| (t, i as u32)).collect();

    let n = uniq.len();
    let mut edge_set = std::collections::HashSet::new();
    let mut self_loops = 0usize;
    let mut duplicates = 0usize;
    for (a, b) in &raw_edges {
        let (u, v) = (index[a.as_str()], index[b.as_str()]);
        if u == v {
            self_loops += 1;
            continue;
        }
        if !edge_set.insert((u.min(v), u.max(v))) {
            duplicates += 1;
        }
    }

    let mut adj = vec![Vec::new(); n];
    for &(u, v) in &edge_set {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let degrees: Vec<u32> = adj.iter().map(|l| l.len() as u32).collect();
    let graph = Graph {
        adj,
        degrees,
        m: edge_set.len(),
        labels: uniq.into_iter().map(str::to_string).collect(),
    };
    Ok(ParsedGraph { graph, self_loops_dropped: self_loops, duplicates_dropped: duplicates })
}

/// Matrix-free application of `M = A − d dᵀ / 2m`.
///
/// Immutable after construction and safe to share across threads. All
/// accumulation runs in a fixed order, so results are deterministic.
#[derive(Debug, Clone)]
pub struct ModularityOperator<'a> {
    graph: &'a Graph,
    degree: DVector<f64>,
    two_m: f64,
}

impl<'a> ModularityOperator<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        let degree = DVector::from_iterator(
            graph.node_count(),
            graph.degrees().iter().map(|&d| d as f64),
        );
        let two_m = 2.0 * graph.edge_count() as f64;
        ModularityOperator { graph, degree, two_m }
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// The cached vector `d = A·1`, i.e. the degree sequence.
    pub fn degree_vector(&self) -> &DVector<f64> {
        &self.degree
    }

    pub fn two_m(&self) -> f64 {
        self.two_m
    }

    /// Computes `M·V = A·V − d (dᵀV)/2m` without materializing `M`.
    pub fn apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>, GraphError> {
        let n = self.graph.node_count();
        if v.nrows() != n {
            return Err(GraphError::DimensionMismatch { expected: n, found: v.nrows() });
        }
        let k = v.ncols();
        let mut out = DMatrix::zeros(n, k);
        for j in 0..k {
            for i in 0..n {
                let mut acc = 0.0;
                for &nb in self.graph.neighbors(i) {
                    acc += v[(nb as usize, j)];
                }
                out[(i, j)] = acc;
            }
        }
        // rank-one correction, one column at a time
        for j in 0..k {
            let mut dv = 0.0;
            for i in 0..n {
                dv += self.degree[i] * v[(i, j)];
            }
            let scale = dv / self.two_m;
            for i in 0..n {
                out[(i, j)] -= scale * self.degree[i];
            }
        }
        Ok(out)
    }

    /// The quadratic form `tr(XᵀMX)`, accumulated column by column.
    pub fn quadratic(&self, x: &DMatrix<f64>) -> Result<f64, GraphError> {
        let mx = self.apply(x)?;
        let mut total = 0.0;
        for j in 0..x.ncols() {
            let mut col = 0.0;
            for i in 0..x.nrows() {
                col += x[(i, j)] * mx[(i, j)];
            }
            total += col;
        }
        Ok(total)
    }

    /// Euclidean gradient of `f(X) = −tr(XᵀMX)`, which is `−2·M·X`.
    pub fn negated_gradient(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, GraphError> {
        Ok(self.apply(x)? * -2.0)
    }
}

/// Modularity `Q = tr(XᵀMX)/2m` of a partition, with `X` its 0/1 assignment
/// matrix. Always lands in `[-1, 1]`.
pub fn modularity_score(graph: &Graph, partition: &Partition) -> Result<f64, GraphError> {
    if partition.len() != graph.node_count() {
        return Err(GraphError::LabelCountMismatch {
            labels: partition.len(),
            nodes: graph.node_count(),
        });
    }
    let op = ModularityOperator::new(graph);
    let x = partition.assignment_matrix();
    Ok(op.quadratic(&x)? / op.two_m())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parse_path_graph() {
        let parsed = parse_edge_list("0 1\n1 2\n", LabelMode::Auto).unwrap();
        let g = &parsed.graph;
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees(), &[1, 2, 1]);
        assert_eq!(parsed.self_loops_dropped, 0);
        assert_eq!(parsed.duplicates_dropped, 0);
    }

    #[test]
    fn parse_collapses_duplicates_and_self_loops() {
        let parsed = parse_edge_list("1 2\n2 1\n1 1\n", LabelMode::Auto).unwrap();
        assert_eq!(parsed.graph.node_count(), 2);
        assert_eq!(parsed.graph.edge_count(), 1);
        assert_eq!(parsed.duplicates_dropped, 1);
        assert_eq!(parsed.self_loops_dropped, 1);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        let err = parse_edge_list("0 1\n2 3 0.5\n", LabelMode::Auto).unwrap_err();
        match err {
            GraphError::MalformedLine { line, found } => {
                assert_eq!(line, 2);
                assert_eq!(found, 3);
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(matches!(
            parse_edge_list("# only comments\n% here\n", LabelMode::Auto),
            Err(GraphError::EmptyGraph)
        ));
        assert!(matches!(
            parse_edge_list("0 1\n", LabelMode::OneBased),
            Err(GraphError::ZeroInOneBased { line: 1 })
        ));
    }

    #[test]
    fn parse_handles_comments_and_remap() {
        let parsed = parse_edge_list("# head\n10 30 % trailing\n30 20\n", LabelMode::Auto).unwrap();
        let g = &parsed.graph;
        assert_eq!(g.node_count(), 3);
        // numeric labels remap in ascending order
        assert_eq!(g.label(0), "10");
        assert_eq!(g.label(1), "20");
        assert_eq!(g.label(2), "30");
        assert_eq!(g.remap_table(), "10\t0\n20\t1\n30\t2\n");
    }

    #[test]
    fn parse_karate() {
        let text = include_str!("../../../data/karate.edges");
        let parsed = parse_edge_list(text, LabelMode::Auto).unwrap();
        assert_eq!(parsed.graph.node_count(), 34);
        assert_eq!(parsed.graph.edge_count(), 78);
    }

    #[test]
    fn operator_annihilates_ones() {
        let g = parse_edge_list(include_str!("../../../data/karate.edges"), LabelMode::Auto)
            .unwrap()
            .graph;
        let op = ModularityOperator::new(&g);
        let ones = DMatrix::from_element(g.node_count(), 1, 1.0);
        let out = op.apply(&ones).unwrap();
        let d_norm = op.degree_vector().norm();
        assert!(out.norm() <= 1e-12 * d_norm);
        assert_abs_diff_eq!(op.quadratic(&ones).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn operator_rejects_dimension_mismatch() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let op = ModularityOperator::new(&g);
        let v = DMatrix::from_element(4, 1, 1.0);
        assert!(matches!(op.apply(&v), Err(GraphError::DimensionMismatch { .. })));
    }

    #[test]
    fn karate_truth_modularity() {
        let g = parse_edge_list(include_str!("../../../data/karate.edges"), LabelMode::Auto)
            .unwrap()
            .graph;
        let truth =
            Partition::parse_labels(include_str!("../../../data/karate.truth")).unwrap();
        let q = modularity_score(&g, &truth).unwrap();
        assert!((q - 0.372).abs() <= 1e-3, "Q = {q}");
    }

    #[test]
    fn single_community_scores_zero() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let p = Partition::from_labels(vec![0; 5]).unwrap();
        assert_abs_diff_eq!(modularity_score(&g, &p).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn score_rejects_label_count_mismatch() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let p = Partition::from_labels(vec![0, 1]).unwrap();
        assert!(matches!(
            modularity_score(&g, &p),
            Err(GraphError::LabelCountMismatch { .. })
        ));
    }
}
