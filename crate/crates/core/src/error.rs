use std::path::PathBuf;

use crate::graph::Edge;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid edit set: additions already present {present:?}, deletions absent {absent:?}, out of range {out_of_range:?}")]
    InvalidEdit {
        present: Vec<Edge>,
        absent: Vec<Edge>,
        out_of_range: Vec<Edge>,
    },

    #[error("graph has no edges, modularity is undefined")]
    EdgelessGraph,

    #[error("community is empty")]
    EmptyCommunity,

    #[error("partition covers {partition} nodes but the graph has {graph}")]
    NodeSetMismatch { partition: usize, graph: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch} (loss {loss}); try a smaller learning rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("budget {budget} is infeasible: graph offers {available} distinct operations")]
    InfeasibleBudget { budget: usize, available: usize },

    #[error("need at least {needed} networks, got {got}")]
    TooFewNetworks { needed: usize, got: usize },

    #[error("invalid chromosome: {0}")]
    InvalidChromosome(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
