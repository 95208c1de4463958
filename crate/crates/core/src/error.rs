use std::path::PathBuf;

use crate::kg::{EntityId, RelationId, Side};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed line")]
    MalformedLine { path: PathBuf, line: usize },

    #[error("{path}:{line}: unknown id {id}")]
    UnknownId { path: PathBuf, line: usize, id: u64 },

    #[error("{path}:{line}: duplicate id {id}")]
    DuplicateId { path: PathBuf, line: usize, id: u64 },

    #[error("relation {0:?} has no triples")]
    UnknownRelation(RelationId),

    #[error("{side} entity {entity:?} does not exist")]
    UnknownEntity { side: Side, entity: EntityId },

    #[error("hop bound must be 1 or 2, got {0}")]
    InvalidHop(usize),

    #[error("cosine of a zero vector")]
    ZeroVector,

    #[error("missing {side} embedding for {what} {index}")]
    MissingEmbedding { side: Side, what: &'static str, index: u32 },

    #[error("embedding file {path}: {message}")]
    EmbeddingFormat { path: PathBuf, message: String },

    #[error("non-finite value in {side} embeddings (row {row})")]
    NonFinite { side: Side, row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no relation vectors available for relation alignment")]
    NoRelationVectors,

    #[error("{0} knowledge graph has no triples")]
    EmptyKg(Side),

    #[error("candidate triple set is empty")]
    EmptyCandidates,

    #[error("explanation triples are not a subset of the candidate triples")]
    NotSubset,

    #[error("trainer failure: {0}")]
    TrainerFailure(String),

    #[error("degenerate synthetic configuration: {0}")]
    DegenerateConfig(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
