use std::path::PathBuf;

use thiserror::Error;

use crate::types::Node;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no centerline")]
    EmptyPattern,

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("node {0} is not in the graph")]
    UnknownNode(Node),

    #[error("({0}, {1}) is not an edge of the graph")]
    MissingEdge(Node, Node),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("infeasible graph: detection {0} has no outgoing edge")]
    InfeasibleGraph(usize),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("no feasible solution in range [{lo}, {hi}]")]
    NoFeasibleSolution { lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: ground-plane position absent and no homography supplied")]
    MissingHomography { path: String, line: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
