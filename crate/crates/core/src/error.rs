use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the registration pipeline and its file loaders.
#[derive(Debug, Error)]
pub enum Error {
    /// The point configuration cannot determine a stable pose.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Every point of the cloud sits at the same location.
    #[error("degenerate cloud: all points coincide")]
    DegenerateCloud,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Dense graph storage refuses inputs above `max` nodes.
    #[error("graph capacity exceeded: {n} correspondences, at most {max} supported")]
    CapacityExceeded { n: usize, max: usize },

    /// Maximal clique enumeration produced more cliques than allowed.
    #[error("clique budget exceeded: more than {cap} maximal cliques")]
    BudgetExceeded { cap: usize },

    /// The maximal cliques found so far hold more node entries than can be
    /// stored.
    #[error("clique storage exceeded: more than {entries} clique node entries")]
    CliqueStorageExceeded { entries: usize },

    #[error("correspondence {index} carries no normals but normal consistency is enabled")]
    MissingNormals { index: usize },

    #[error("no clique with at least {min_size} nodes")]
    NoClique { min_size: usize },

    #[error("no hypotheses to select from")]
    NoHypotheses,

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
