use std::path::PathBuf;

use thiserror::Error;

use crate::rayleigh_solver::EigenPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh has {nodes} nodes, above the cap of {cap} (set VAREXP_MAX_NODES to raise it)")]
    NodeCap { nodes: usize, cap: usize },

    #[error("operands live on different meshes")]
    MeshMismatch,

    #[error("exponent value {value} at node {node} is not > 1")]
    InadmissibleExponent { node: usize, value: f64 },

    #[error("invalid exponent specification: {0}")]
    InvalidExponent(String),

    #[error("exponent sequence rejected at h = {h}: {reason}")]
    Sequence { h: u64, reason: String },

    #[error("invalid exponent sequence: {0}")]
    InvalidSequence(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0} vanishes identically")]
    ZeroFunction(&'static str),

    #[error("function is not Dirichlet-admissible: node {node} on the boundary carries {value}")]
    NotDirichlet { node: usize, value: f64 },

    #[error("root finding failed: {0}")]
    RootFind(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("descent did not converge after {} iterations (best lambda {})", .0.iterations, .0.lambda)]
    NotConverged(Box<EigenPair>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
