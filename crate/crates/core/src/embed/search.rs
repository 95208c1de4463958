use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use super::EmbeddingStore;
use crate::error::{Error, Result};
use crate::kg::{EntityId, Side};

/// Cosine similarity, accumulated in 64-bit and clamped to `[-1, 1]`.
pub fn cosine<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Exact top-k targets per source entity by cosine similarity.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTopK {
    rows: Vec<(EntityId, Vec<(EntityId, f64)>)>,
    index: HashMap<EntityId, usize>,
}

impl SimilarityTopK {
    /// Ranked `(target, score)` list of `source`, best first.
    pub fn get(&self, source: EntityId) -> Option<&[(EntityId, f64)]> {
        self.index.get(&source).map(|&i| self.rows[i].1.as_slice())
    }

    pub fn rows(&self) -> impl Iterator<Item = (EntityId, &[(EntityId, f64)])> {
        self.rows.iter().map(|(s, r)| (*s, r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn unit_rows(store: &EmbeddingStore, side: Side, ids: &[EntityId]) -> Result<Vec<Vec<f64>>> {
    ids.iter()
        .map(|&e| {
            let v = store.entity(side, e)?;
            let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(v.iter().map(|&x| x as f64 / norm).collect())
        })
        .collect()
}

fn rank(a: &(EntityId, f64), b: &(EntityId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Exact top-`k` retrieval of target entities for each source entity.
/// Ties are broken by lower target index. Rows are computed in parallel on
/// the current rayon pool and returned in `sources` order.
pub fn similarity_topk(
    store: &EmbeddingStore,
    sources: &[EntityId],
    targets: &[EntityId],
    k: usize,
) -> Result<SimilarityTopK> {
    if k == 0 {
        return Err(Error::InvalidConfig("top-k requires k >= 1".into()));
    }
    let src = unit_rows(store, Side::Source, sources)?;
    let tgt = unit_rows(store, Side::Target, targets)?;
    let rows: Vec<_> = src
        .par_iter()
        .zip(sources.par_iter())
        .map(|(u, &s)| {
            let mut scored: Vec<(EntityId, f64)> = tgt
                .iter()
                .zip(targets)
                .map(|(v, &t)| {
                    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    (t, dot.clamp(-1.0, 1.0))
                })
                .collect();
            if k < scored.len() {
                scored.select_nth_unstable_by(k - 1, rank);
                scored.truncate(k);
            }
            scored.sort_unstable_by(rank);
            (s, scored)
        })
        .collect();
    let index = rows.iter().enumerate().map(|(i, (s, _))| (*s, i)).collect();
    Ok(SimilarityTopK { rows, index })
}

/// Maps every source to its single most similar target. Several sources may
/// land on the same target.
pub fn greedy_align(
    store: &EmbeddingStore,
    sources: &[EntityId],
    targets: &[EntityId],
) -> Result<Vec<(EntityId, EntityId)>> {
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let top = similarity_topk(store, sources, targets, 1)?;
    Ok(top.rows().map(|(s, row)| (s, row[0].0)).collect())
}
