use std::path::PathBuf;

use crate::graph::NodeId;

/// Errors produced by the simulator and the analysis toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid fault configuration: {0}")]
    InvalidFaults(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("node {node} has in-degree {in_degree}, at least {required} needed for f = {f}")]
    DegreeTooSmall {
        node: NodeId,
        in_degree: usize,
        required: usize,
        f: usize,
    },

    #[error("trim needs at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("unknown adversary strategy `{0}`")]
    UnknownStrategy(String),

    #[error("bad parameter `{param}` for strategy `{strategy}`: {reason}")]
    BadStrategyParam {
        strategy: String,
        param: String,
        reason: String,
    },

    #[error("matrix is not row stochastic: {0}")]
    NotStochastic(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("transition row for node {node} at t = {t}: {reason}")]
    Reconstruction {
        node: NodeId,
        t: usize,
        reason: String,
    },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
