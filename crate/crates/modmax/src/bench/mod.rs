//! Synthetic generators, a Louvain baseline, and brute-force oracles.
//!
//! Ideal graphs are disjoint unions of cliques; their planted assignment is
//! the global maximizer of the modularity quadratic over assignment matrices,
//! with closed-form value `Σnᵢ² − Σnᵢ⁴/Σnᵢ²` when the clique algebra keeps
//! the unit diagonal. The generators here emit *simple* graphs (no
//! self-loops) because that is what the solver consumes; the [`oracle`]
//! module separately provides the with-diagonal dense algebra for value
//! checks, so both conventions are exercised where each one is meaningful.

pub mod louvain;
pub mod oracle;

pub use louvain::louvain;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::partition::Partition;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("community sizes must each be at least 2, got {0}")]
    SizeTooSmall(usize),
    #[error("need at least 2 communities")]
    TooFewCommunities,
    #[error("mixing parameter {mu} violates the structure condition; feasible range is [0, {max_mu:.4})")]
    InfeasibleMixing { mu: f64, max_mu: f64 },
    #[error("derived edge probability {p:.4} exceeds 1; feasible mixing range is [{min_mu:.4}, {max_mu:.4})")]
    InfeasibleDegree { p: f64, min_mu: f64, max_mu: f64 },
    #[error("{q}^{n} labelings exceed the enumeration guard of 10^7")]
    InstanceTooLarge { q: usize, n: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Sizes of the cliques of an ideal graph.
#[derive(Debug, Clone)]
pub struct IdealGraphSpec {
    pub sizes: Vec<usize>,
}

impl IdealGraphSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self, BenchError> {
        if sizes.len() < 2 {
            return Err(BenchError::TooFewCommunities);
        }
        if let Some(&bad) = sizes.iter().find(|&&s| s < 2) {
            return Err(BenchError::SizeTooSmall(bad));
        }
        Ok(IdealGraphSpec { sizes })
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Disjoint cliques of the given sizes, plus the planted partition.
pub fn ideal_graph(spec: &IdealGraphSpec) -> Result<(Graph, Partition), BenchError> {
    let n = spec.node_count();
    let mut edges = Vec::new();
    let mut labels = Vec::with_capacity(n);
    let mut offset = 0u32;
    for (c, &size) in spec.sizes.iter().enumerate() {
        for i in 0..size as u32 {
            labels.push(c as u32);
            for j in (i + 1)..size as u32 {
                edges.push((offset + i, offset + j));
            }
        }
        offset += size as u32;
    }
    let graph = Graph::from_edges(n, &edges)?;
    let truth = Partition::from_labels(labels).expect("nonempty by construction");
    Ok((graph, truth))
}

/// Planted-partition generator parameters.
///
/// Every intra-community pair is connected with probability `p_in(c)` and
/// every inter-community pair with a global `p_out`, calibrated so the mean
/// degree is `avg_degree` and the expected external-degree fraction of every
/// node is `mixing`.
#[derive(Debug, Clone)]
pub struct PlantedPartitionSpec {
    pub sizes: Vec<usize>,
    pub avg_degree: f64,
    pub mixing: f64,
    pub seed: u64,
}

/// A generated instance with its realized (empirical) mixing.
#[derive(Debug)]
pub struct PlantedGraph {
    pub graph: Graph,
    pub truth: Partition,
    pub realized_mixing: f64,
}

impl PlantedPartitionSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.sizes.len() < 2 {
            return Err(BenchError::TooFewCommunities);
        }
        if let Some(&bad) = self.sizes.iter().find(|&&s| s < 2) {
            return Err(BenchError::SizeTooSmall(bad));
        }
        let n: usize = self.sizes.iter().sum();
        let max_size = *self.sizes.iter().max().unwrap();
        let max_mu = (n - max_size) as f64 / n as f64;
        if !(0.0..1.0).contains(&self.mixing) || self.mixing >= max_mu {
            return Err(BenchError::InfeasibleMixing { mu: self.mixing, max_mu });
        }
        // p_in(c) = (1-μ)·d̄/(n_c − 1) must stay a probability
        for &size in &self.sizes {
            let p_in = (1.0 - self.mixing) * self.avg_degree / (size as f64 - 1.0);
            if p_in > 1.0 {
                let min_mu = (1.0 - (size as f64 - 1.0) / self.avg_degree).max(0.0);
                return Err(BenchError::InfeasibleDegree { p: p_in, min_mu, max_mu });
            }
        }
        let weighted_mean_size: f64 =
            self.sizes.iter().map(|&s| (s * s) as f64).sum::<f64>() / n as f64;
        let p_out = self.mixing * self.avg_degree / (n as f64 - weighted_mean_size);
        if p_out > 1.0 {
            return Err(BenchError::InfeasibleDegree { p: p_out, min_mu: 0.0, max_mu });
        }
        Ok(())
    }
}

/// Draws a planted-partition graph. Deterministic for a fixed spec.
pub fn planted_partition(spec: &PlantedPartitionSpec) -> Result<PlantedGraph, BenchError> {
    spec.validate()?;
    let n: usize = spec.sizes.iter().sum();
    let mut community = Vec::with_capacity(n);
    for (c, &size) in spec.sizes.iter().enumerate() {
        community.extend(std::iter::repeat_n(c as u32, size));
    }

    // calibration: mean internal degree (1-μ)·d̄ for every node, and the
    // degree-weighted mean community size makes the external mean μ·d̄
    let weighted_mean_size: f64 =
        spec.sizes.iter().map(|&s| (s * s) as f64).sum::<f64>() / n as f64;
    let p_out = spec.mixing * spec.avg_degree / (n as f64 - weighted_mean_size);
    let p_in: Vec<f64> = spec
        .sizes
        .iter()
        .map(|&s| (1.0 - spec.mixing) * spec.avg_degree / (s as f64 - 1.0))
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if community[i] == community[j] {
                p_in[community[i] as usize]
            } else {
                p_out
            };
            if rng.random::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    let graph = Graph::from_edges(n, &edges)?;

    // realized mixing: mean over non-isolated nodes of k_out / (k_in + k_out)
    let mut internal = vec![0usize; n];
    for &(a, b) in &edges {
        if community[a as usize] == community[b as usize] {
            internal[a as usize] += 1;
            internal[b as usize] += 1;
        }
    }
    let mut acc = 0.0;
    let mut counted = 0usize;
    for (v, &inside) in internal.iter().enumerate() {
        let deg = graph.degree(v);
        if deg > 0 {
            acc += (deg - inside) as f64 / deg as f64;
            counted += 1;
        }
    }
    let realized_mixing = if counted > 0 { acc / counted as f64 } else { 0.0 };
    let truth = Partition::from_labels(community).expect("nonempty");
    Ok(PlantedGraph { graph, truth, realized_mixing })
}

/// Exhaustively maximizes `tr(XᵀMX)` over surjective `q`-labelings of the
/// graph's nodes, up to label permutation. Ties resolve to the
/// lexicographically smallest labeling.
pub fn brute_force_best_assignment(
    graph: &Graph,
    q: usize,
) -> Result<(Partition, f64), BenchError> {
    let n = graph.node_count();
    let mut dense = nalgebra::DMatrix::zeros(n, n);
    for (u, v) in graph.edges() {
        dense[(u as usize, v as usize)] = 1.0;
        dense[(v as usize, u as usize)] = 1.0;
    }
    oracle::brute_force_on_adjacency(&dense, q)
}
