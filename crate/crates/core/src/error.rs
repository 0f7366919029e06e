use std::path::PathBuf;

/// Errors produced anywhere in the decomposition pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("edge references unknown class id `{0}`")]
    UnknownClass(String),

    #[error("duplicate class id `{0}`")]
    DuplicateClass(String),

    #[error("graph has no classes")]
    EmptyGraph,

    #[error("no source files found under {}", .0.display())]
    NoSources(PathBuf),

    #[error("no semantic signal: every term bag is empty")]
    EmptyVocabulary,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("all points are identical")]
    AllPointsIdentical,

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
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
