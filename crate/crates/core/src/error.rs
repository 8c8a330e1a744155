use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports. Each variant maps to a stable short
/// code (see [`Error::code`]) used by the CLI's `E:<code>:<detail>` lines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty document")]
    EmptyDocument,
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("duplicate node name {0:?}")]
    DuplicateName(String),
    #[error("node {node:?} references parent {parent:?} which is not defined on an earlier line")]
    UnknownParent { node: String, parent: String },
    #[error("node {0:?} is its own parent")]
    Cycle(String),
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("root-only tree")]
    RootOnly,
    #[error("node index {index} out of range for tree of {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("node {0:?} is not a leaf")]
    NotLeaf(String),
    #[error("node {0:?} is a leaf")]
    NotInternal(String),
    #[error("label set has {count} members on the path of leaf {leaf:?}")]
    Antichain { leaf: String, count: usize },
    #[error("invalid treecut: {0}")]
    InvalidCut(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no embedding for node {0:?}")]
    MissingEmbedding(String),
    #[error("zero-norm vector for {0:?}")]
    ZeroVector(String),
    #[error("unknown node name {0:?}")]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tree has {0} internal nodes; exhaustive enumeration is limited to 20")]
    TooLarge(usize),
    #[error("empty data")]
    EmptyData,
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyDocument => "empty",
            Error::Parse { .. } => "parse",
            Error::DuplicateName(_) => "duplicate-name",
            Error::UnknownParent { .. } => "unknown-parent",
            Error::Cycle(_) => "cycle",
            Error::RootCount(_) => "root-count",
            Error::RootOnly => "root-only",
            Error::IndexOutOfRange { .. } => "index",
            Error::NotLeaf(_) => "not-leaf",
            Error::NotInternal(_) => "not-internal",
            Error::Antichain { .. } => "antichain",
            Error::InvalidCut(_) => "invalid-cut",
            Error::DimensionMismatch { .. } => "dim",
            Error::MissingEmbedding(_) => "missing-embedding",
            Error::ZeroVector(_) => "zero-vector",
            Error::UnknownName(_) => "unknown-name",
            Error::InvalidParameter(_) => "param",
            Error::TooLarge(_) => "too-large",
            Error::EmptyData => "empty-data",
            Error::NonFinite { .. } => "non-finite",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn parse(line: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            line,
            detail: detail.into(),
        }
    }
}
