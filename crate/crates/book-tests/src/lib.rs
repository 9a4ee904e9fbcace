//! Doc-test shim for the book.
//!
//! mdBook cannot run snippets against crate dependencies, so each chapter is
//! included here as a doc comment and `cargo test --doc` executes every code
//! block. A snippet that drifts from the library breaks the build.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/graphs-and-modularity.md")]
pub mod graphs_and_modularity {}

#[doc = include_str!("../../../book/src/stiefel-geometry.md")]
pub mod stiefel_geometry {}

#[doc = include_str!("../../../book/src/proximal-subproblem.md")]
pub mod proximal_subproblem {}

#[doc = include_str!("../../../book/src/solver-pipeline.md")]
pub mod solver_pipeline {}

#[doc = include_str!("../../../book/src/evaluating-partitions.md")]
pub mod evaluating_partitions {}

#[doc = include_str!("../../../book/src/benchmarks-and-oracles.md")]
pub mod benchmarks_and_oracles {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
