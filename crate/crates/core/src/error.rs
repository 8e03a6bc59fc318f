use thiserror::Error;

/// Reasons a single hyperedge fails validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdgeError {
    #[error("vertex index {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("negative vertex index {0}")]
    NegativeVertex(i64),
    #[error("unparsable vertex index {0:?}")]
    BadVertex(String),
    #[error("fewer than 2 distinct vertices (got {0})")]
    TooFewVertices(usize),
    #[error("unparsable weight {0:?}")]
    BadWeight(String),
    #[error("weight must be positive and finite, got {0}")]
    InvalidWeight(f64),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: EdgeError,
    },
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid vertex pair ({u}, {v}) for n = {n}")]
    InvalidPair { u: usize, v: usize, n: usize },
    #[error("step {step}: hyperedge has {size} vertices, exceeding rank bound {bound}")]
    RankBoundExceeded { step: usize, size: usize, bound: usize },
    #[error("hyperedge touches vertex {vertex} but the stream has n = {n}")]
    EdgeOutsideStream { vertex: usize, n: usize },
    #[error("Cholesky factorization of the ridged Laplacian failed")]
    Factorization,
    #[error("missing reweighting record for step {0}")]
    MissingReweighting(usize),
    #[error("n = {0} too large for exhaustive cut enumeration (limit 22)")]
    TooManyVertices(usize),
    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),
    #[error("line {line}: malformed record: {reason}")]
    Record { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
