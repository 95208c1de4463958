//! Relation alignment between the two graphs by mutual nearest neighbours.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbeddingStore, RelationTable};
use crate::error::{Error, Result};
use crate::kg::{Kg, RelationId};

/// Where relation vectors come from when aligning relations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationSource {
    /// Native relation vectors, or the mean head-tail difference.
    #[default]
    Model,
    /// Relation-name vectors supplied alongside the embeddings.
    Names,
}

impl std::str::FromStr for RelationSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(RelationSource::Model),
            "names" => Ok(RelationSource::Names),
            other => Err(Error::InvalidConfig(format!("unknown relation source `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationAlignment {
    pairs: Vec<(RelationId, RelationId, f64)>,
    forward: BTreeMap<RelationId, RelationId>,
    backward: BTreeMap<RelationId, RelationId>,
}

impl RelationAlignment {
    pub fn from_pairs(pairs: Vec<(RelationId, RelationId, f64)>) -> Self {
        let forward = pairs.iter().map(|&(a, b, _)| (a, b)).collect();
        let backward = pairs.iter().map(|&(a, b, _)| (b, a)).collect();
        RelationAlignment { pairs, forward, backward }
    }

    /// Aligned pairs with their cosine similarity, in source order.
    pub fn pairs(&self) -> &[(RelationId, RelationId, f64)] {
        &self.pairs
    }

    pub fn target_of(&self, r: RelationId) -> Option<RelationId> {
        self.forward.get(&r).copied()
    }

    pub fn source_of(&self, r: RelationId) -> Option<RelationId> {
        self.backward.get(&r).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn relation_tables(
    store: &EmbeddingStore,
    kg1: &Kg,
    kg2: &Kg,
    source: RelationSource,
) -> Result<(RelationTable, RelationTable)> {
    Ok(match source {
        RelationSource::Model => (RelationTable::from_model(store, kg1)?, RelationTable::from_model(store, kg2)?),
        RelationSource::Names => (RelationTable::from_names(store, kg1)?, RelationTable::from_names(store, kg2)?),
    })
}

/// Index of the best-scoring entry; ties go to the earliest entry.
fn best(scores: &[f64]) -> Option<usize> {
    let mut out: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && out.is_none_or(|j| s > scores[j]) {
            out = Some(i);
        }
    }
    out
}

/// Pairs `(r1, r2)` where each relation is the other's nearest neighbour by
/// cosine similarity. Relations without a vector, or with a zero vector, are
/// never aligned.
pub fn align_relations(source: &RelationTable, target: &RelationTable) -> Result<RelationAlignment> {
    let a: Vec<(RelationId, &[f64])> = source.iter().collect();
    let b: Vec<(RelationId, &[f64])> = target.iter().collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::NoRelationVectors);
    }
    let sims: Vec<Vec<f64>> = a
        .iter()
        .map(|(_, u)| b.iter().map(|(_, v)| cosine(u, v).unwrap_or(f64::NEG_INFINITY)).collect())
        .collect();
    let row_best: Vec<Option<usize>> = sims.iter().map(|row| best(row)).collect();
    let col_best: Vec<Option<usize>> = (0..b.len())
        .map(|j| best(&sims.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();
    let pairs = row_best
        .iter()
        .enumerate()
        .filter_map(|(i, &j)| {
            let j = j?;
            (col_best[j] == Some(i)).then(|| (a[i].0, b[j].0, sims[i][j]))
        })
        .collect();
    Ok(RelationAlignment::from_pairs(pairs))
}
