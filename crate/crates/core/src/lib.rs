//! Explanation and repair of embedding-based entity alignment.
//!
//! The pipeline explains each predicted pair by a semantic matching subgraph,
//! scores it with an alignment dependency graph, and repairs the predicted
//! alignment by resolving relation-alignment, one-to-many and low-confidence
//! conflicts.

pub mod adg;
pub mod embed;
pub mod error;
pub mod eval;
pub mod explain;
pub mod fixtures;
pub mod kg;
pub mod pairs;
pub mod repair;
pub mod synth;
pub mod trainer;

pub use adg::{Adg, AdgConfig, EdgeClass};
pub use embed::{EmbeddingStore, Matrix, PathMode, RelationTable, SimilarityTopK};
pub use error::{Error, Result};
pub use explain::{ExplainContext, Explanation, MatchedPathPair};
pub use kg::{Direction, EntityId, Kg, KgBuilder, RelationId, RelationPath, Side, Step, Triple};
pub use pairs::{AlignmentView, PairSet};

pub use repair::{AlignmentState, RepairConfig, RepairOutcome, Stages};
pub use synth::{SynthConfig, SynthPair};
pub use trainer::TrainConfig;
