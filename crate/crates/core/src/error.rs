use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("node index {index} out of range for a graph with {node_count} nodes")]
    IndexOutOfRange { index: usize, node_count: usize },
    #[error("graph has no edges")]
    DegenerateGraph,
    #[error("too few nodes: {0}")]
    TooFewNodes(String),

    #[error("round {round}: remaining edges cannot span all nodes")]
    Disconnected { round: usize },
    #[error("k = {k} is too large (at most {max})")]
    KTooLarge { k: usize, max: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("round {round}: no perfect matching among remaining pairs")]
    NoPerfectMatching { round: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid label {0:?} (expected 1 or 2)")]
    InvalidLabel(String),
    #[error("each sample needs at least 2 observations (m = {m}, n = {n})")]
    SampleTooSmall { m: usize, n: usize },
    #[error("singular covariance (flat graph): R1 and R2 are affinely dependent")]
    SingularCovariance,
    #[error("zero null variance for {0}")]
    ZeroVariance(&'static str),
    #[error("enumeration of {count} labelings exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("non-finite input value at row {row}, column {column}")]
    NonFiniteInput { row: usize, column: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("observation {0} has an empty network")]
    ZeroNetwork(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("distance matrix not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("invalid distance at ({row}, {column}): {reason}")]
    InvalidDistance { row: usize, column: usize, reason: &'static str },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}
