use std::path::PathBuf;

use thiserror::Error;

use crate::loss::LossBreakdown;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: node index {index} out of range for layer {layer} with {size} nodes")]
    Bounds {
        path: PathBuf,
        line: usize,
        layer: usize,
        index: usize,
        size: usize,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid value for `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("layer pair ({k},{l}) is degenerate: {edges} edges out of {cells} cells")]
    DegeneratePair {
        k: usize,
        l: usize,
        edges: usize,
        cells: usize,
    },

    #[error("layer {layer} needs at least {needed} labeled nodes, found {found}")]
    TooFewLabels {
        layer: usize,
        needed: usize,
        found: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {breakdown}")]
    Divergence {
        epoch: usize,
        breakdown: Box<LossBreakdown>,
    },

    #[error("empty test set")]
    EmptyTestSet,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
