use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate {kind} id {id:?} at line {line}")]
    DuplicateId {
        kind: &'static str,
        id: String,
        line: usize,
    },

    #[error("qrels line {line}: unknown {kind} id {id:?}")]
    DanglingId {
        kind: &'static str,
        id: String,
        line: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("k-means needs at least k={k} vectors, got {n}")]
    TooFewVectors { k: usize, n: usize },

    #[error("subspace {subspace}: {source}")]
    Subspace {
        subspace: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("token {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },

    #[error("docid length {got} does not match registry length {expected}")]
    DocidLength { expected: usize, got: usize },

    #[error("document {doc:?} contains the reserved separator byte 0x00")]
    SentinelInText { doc: String },

    #[error("empty pattern")]
    EmptyPattern,

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {path}; run `{needs}` first")]
    MissingArtifact { path: PathBuf, needs: &'static str },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_stage(self, stage: usize) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
