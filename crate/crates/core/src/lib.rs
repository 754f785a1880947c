//! Seeded community partition of networks.
//!
//! Node affinities come from inverse edge betweenness, class evidence from
//! a handful of labelled benchmark nodes, and the partition from a convex
//! relaxation of the multi-class cut solved by an augmented Lagrangian
//! method. Confident nodes can be promoted to benchmarks between stages.

pub mod benchgen;
pub mod centrality;
pub mod cli;
pub mod error;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod region_force;
pub mod solver;
pub mod tsos;

pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::ClassMatrix;
pub use region_force::{BenchmarkSets, Origin};
pub use solver::{solve, Solution, SolverConfig};

/// Formats a float with 6 significant digits, the precision used in reports.
pub fn fmt_sig(x: f64) -> String {
    round_sig(x).to_string()
}

/// Rounds to 6 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}
