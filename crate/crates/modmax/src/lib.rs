//! Community detection by sparse modularity maximization on a constrained
//! Stiefel manifold.
//!
//! The solver maximizes `tr(XᵀMX) − λ‖X‖₁` over orthonormal frames whose
//! column span contains the all-ones vector, where `M` is the modularity
//! matrix of an undirected simple graph. An accelerated projected proximal
//! gradient loop with a periodic monotone safeguard does the heavy lifting;
//! a continuation schedule grows the sparsity weight `λ` until the penalized
//! objective stops improving, and the final frame is rounded row-wise into a
//! community assignment.
//!
//! The crate splits into:
//!
//! - [`graph`]: edge-list ingestion and the matrix-free modularity operator;
//! - [`partition`]: labelings and their assignment-matrix views;
//! - [`manifold`]: Stiefel geometry (tangent projection, QR+SVD retraction,
//!   its Lyapunov inverse, and the feasible-set projection);
//! - [`prox`]: the tangent-space ℓ1 proximal subproblem, solved by a
//!   semismooth Newton method on the dual multiplier;
//! - [`solver`]: spectral initialization, the accelerated loop with safeguard,
//!   λ-continuation, and rounding;
//! - [`metrics`]: NMI and AMI partition-similarity scores;
//! - [`bench`](mod@bench): synthetic generators, a Louvain baseline, and
//!   brute-force oracles for small instances;
//! - [`report`]: deterministic, schema-backed run reports for the CLI.
//!
//! See the book under `book/` for a guided tour; every snippet there compiles
//! and runs as a doc-test.

pub mod bench;
pub mod graph;
pub mod manifold;
pub mod metrics;
pub mod partition;
pub mod prox;
pub mod report;
pub mod solver;

pub use graph::{modularity_score, parse_edge_list, Graph, LabelMode, ModularityOperator};
pub use manifold::{FeasiblePoint, StiefelPoint, TangentVector};
pub use partition::Partition;
pub use solver::{detect_communities, DetectionResult, SolverConfig};
