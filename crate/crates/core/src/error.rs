use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("self-loop on node {node}")]
    SelfLoop { node: u64 },

    #[error("duplicate edge ({a}, {b})")]
    DuplicateEdge { a: u64, b: u64 },

    #[error("invalid weight {weight} on edge ({a}, {b})")]
    InvalidWeight { a: u64, b: u64, weight: f64 },

    #[error("node index {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("node {0} does not appear in the graph")]
    UnknownNode(u64),

    #[error("node {0} has no label")]
    MissingLabel(u64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value produced by the {update} update at iteration {iter}")]
    NonFinite { update: &'static str, iter: usize },

    #[error("solver did not converge within {iters} iterations")]
    NotConverged { iters: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line tool: 1 for configuration
    /// problems, 2 for bad input data, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite { .. } | Error::NotConverged { .. } | Error::Invariant(_) => 3,
            _ => 2,
        }
    }
}
