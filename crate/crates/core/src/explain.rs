//! Semantic matching subgraph explanations for predicted pairs.
//!
//! An explanation is built in two steps: neighbors of the two entities that
//! are themselves aligned (by prediction or seed) are matched, then relation
//! paths from each central entity to its matched neighbor are paired by
//! mutual-best cosine similarity of their path embeddings. The triples along
//! the paired paths form the explanation.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::embed::{cosine, path_embedding, EmbeddingStore, PathMode, RelationTable};
use crate::error::Result;
use crate::kg::{check_hops, Direction, EntityId, Kg, RelationPath, Triple};
use crate::pairs::{AlignmentView, Pair};

#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPathPair {
    pub source_path: RelationPath,
    pub target_path: RelationPath,
    pub similarity: f64,
}

impl MatchedPathPair {
    pub fn neighbor(&self) -> Pair {
        (self.source_path.endpoint(), self.target_path.endpoint())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub pair: Pair,
    pub matched_neighbors: Vec<Pair>,
    pub path_pairs: Vec<MatchedPathPair>,
    /// Selected source-graph triples, sorted.
    pub source_triples: Vec<Triple>,
    /// Selected target-graph triples, sorted.
    pub target_triples: Vec<Triple>,
}

impl Explanation {
    /// True when no path pair was matched; the selected triple set is empty.
    pub fn is_no_match(&self) -> bool {
        self.path_pairs.is_empty()
    }

    pub fn triple_count(&self) -> usize {
        self.source_triples.len() + self.target_triples.len()
    }
}

/// Shared read-only inputs for explanation generation.
#[derive(Clone, Debug)]
pub struct ExplainContext<'a> {
    pub kg1: &'a Kg,
    pub kg2: &'a Kg,
    pub store: &'a EmbeddingStore,
    rel1: RelationTable,
    rel2: RelationTable,
    h: usize,
    mode: PathMode,
}

impl<'a> ExplainContext<'a> {
    pub fn new(kg1: &'a Kg, kg2: &'a Kg, store: &'a EmbeddingStore, h: usize, mode: PathMode) -> Result<Self> {
        check_hops(h)?;
        store.covers(kg1)?;
        store.covers(kg2)?;
        Ok(ExplainContext {
            kg1,
            kg2,
            store,
            rel1: RelationTable::from_model(store, kg1)?,
            rel2: RelationTable::from_model(store, kg2)?,
            h,
            mode,
        })
    }

    pub fn hops(&self) -> usize {
        self.h
    }

    pub fn relation_tables(&self) -> (&RelationTable, &RelationTable) {
        (&self.rel1, &self.rel2)
    }

    /// The h-hop candidate triples of both entities of `pair`.
    pub fn candidate_triples(&self, pair: Pair) -> Result<(Vec<Triple>, Vec<Triple>)> {
        Ok((
            self.kg1.neighborhood_triples(pair.0, self.h)?,
            self.kg2.neighborhood_triples(pair.1, self.h)?,
        ))
    }

    /// Paths from `center` grouped by endpoint, each with its embedding.
    fn paths_by_endpoint(
        &self,
        kg: &Kg,
        rel: &RelationTable,
        center: EntityId,
        wanted: &BTreeSet<EntityId>,
    ) -> Result<BTreeMap<EntityId, Vec<(RelationPath, Vec<f64>)>>> {
        let mut out: BTreeMap<EntityId, Vec<_>> = BTreeMap::new();
        for p in kg.enumerate_paths(center, self.h)? {
            if wanted.contains(&p.endpoint()) {
                let emb = path_embedding(self.store, rel, &p, self.mode)?;
                out.entry(p.endpoint()).or_default().push((p, emb));
            }
        }
        Ok(out)
    }

    /// Mutual-best path pairs between `pair` and one matched neighbor pair.
    pub fn match_paths(&self, pair: Pair, neighbor: Pair) -> Result<Vec<MatchedPathPair>> {
        let p1 = self.paths_by_endpoint(self.kg1, &self.rel1, pair.0, &BTreeSet::from([neighbor.0]))?;
        let p2 = self.paths_by_endpoint(self.kg2, &self.rel2, pair.1, &BTreeSet::from([neighbor.1]))?;
        match (p1.get(&neighbor.0), p2.get(&neighbor.1)) {
            (Some(a), Some(b)) => Ok(mutual_best(a, b)),
            _ => Ok(Vec::new()),
        }
    }

    pub fn explain(&self, pair: Pair, alignments: &impl AlignmentView) -> Result<Explanation> {
        let neighbors = matched_neighbors(pair, self.kg1, self.kg2, alignments, self.h)?;
        let wanted1: BTreeSet<_> = neighbors.iter().map(|n| n.0).collect();
        let wanted2: BTreeSet<_> = neighbors.iter().map(|n| n.1).collect();
        let (paths1, paths2) = if neighbors.is_empty() {
            Default::default()
        } else {
            (
                self.paths_by_endpoint(self.kg1, &self.rel1, pair.0, &wanted1)?,
                self.paths_by_endpoint(self.kg2, &self.rel2, pair.1, &wanted2)?,
            )
        };
        let mut path_pairs = Vec::new();
        for n in &neighbors {
            if let (Some(a), Some(b)) = (paths1.get(&n.0), paths2.get(&n.1)) {
                path_pairs.extend(mutual_best(a, b));
            }
        }
        let mut src = BTreeSet::new();
        let mut tgt = BTreeSet::new();
        for pp in &path_pairs {
            src.extend(pp.source_path.triples());
            tgt.extend(pp.target_path.triples());
        }
        Ok(Explanation {
            pair,
            matched_neighbors: neighbors,
            path_pairs,
            source_triples: src.into_iter().collect(),
            target_triples: tgt.into_iter().collect(),
        })
    }
}

/// Pairs `(n1, n2)` with `n1` within `h` hops of `pair.0`, `n2` within `h`
/// hops of `pair.1`, and `n1` aligned to `n2`. The central pair is excluded.
pub fn matched_neighbors(
    pair: Pair,
    kg1: &Kg,
    kg2: &Kg,
    alignments: &impl AlignmentView,
    h: usize,
) -> Result<Vec<Pair>> {
    check_hops(h)?;
    kg1.check_entity(pair.0)?;
    kg2.check_entity(pair.1)?;
    let near2: BTreeSet<EntityId> = kg2.entities_within(pair.1, h).into_iter().map(|(e, _)| e).collect();
    let mut out = Vec::new();
    for (n1, _) in kg1.entities_within(pair.0, h) {
        for n2 in alignments.targets_of(n1) {
            if near2.contains(&n2) && (n1, n2) != pair {
                out.push((n1, n2));
            }
        }
    }
    Ok(out)
}

fn similarity(u: &[f64], v: &[f64]) -> f64 {
    // Zero path vectors carry no signal.
    cosine(u, v).unwrap_or(0.0)
}

/// First index of the maximum; inputs are in lexicographic path order.
fn argmax(scores: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

fn mutual_best(a: &[(RelationPath, Vec<f64>)], b: &[(RelationPath, Vec<f64>)]) -> Vec<MatchedPathPair> {
    let sims: Vec<Vec<f64>> = a.iter().map(|(_, u)| b.iter().map(|(_, v)| similarity(u, v)).collect()).collect();
    let best_for_b: Vec<usize> =
        (0..b.len()).map(|j| argmax(sims.iter().map(|row| row[j])).unwrap()).collect();
    let mut out = Vec::new();
    for (i, row) in sims.iter().enumerate() {
        let j = argmax(row.iter().copied()).unwrap();
        if best_for_b[j] == i {
            out.push(MatchedPathPair {
                source_path: a[i].0.clone(),
                target_path: b[j].0.clone(),
                similarity: row[j],
            });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct StepDoc {
    pub direction: Direction,
    pub relation: u64,
    pub relation_label: String,
    pub entity: u64,
    pub entity_label: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairDoc {
    pub source: u64,
    pub target: u64,
    pub source_label: String,
    pub target_label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathPairDoc {
    pub similarity: f64,
    pub source_path: Vec<StepDoc>,
    pub target_path: Vec<StepDoc>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TriplesDoc {
    pub source: Vec<[u64; 3]>,
    pub target: Vec<[u64; 3]>,
}

/// JSON-facing form of an [`Explanation`], using external ids.
#[derive(Clone, Debug, Serialize)]
pub struct ExplanationDoc {
    pub pair: PairDoc,
    pub no_match: bool,
    pub neighbors: Vec<PairDoc>,
    pub path_pairs: Vec<PathPairDoc>,
    pub triples: TriplesDoc,
}

pub fn pair_doc(kg1: &Kg, kg2: &Kg, pair: Pair, similarity: Option<f64>) -> PairDoc {
    PairDoc {
        source: kg1.entity_external_id(pair.0),
        target: kg2.entity_external_id(pair.1),
        source_label: kg1.entity_label(pair.0).to_string(),
        target_label: kg2.entity_label(pair.1).to_string(),
        similarity,
    }
}

pub(crate) fn path_doc(kg: &Kg, path: &RelationPath) -> Vec<StepDoc> {
    path.steps
        .iter()
        .map(|s| StepDoc {
            direction: s.direction,
            relation: kg.relation_external_id(s.relation),
            relation_label: kg.relation_label(s.relation).to_string(),
            entity: kg.entity_external_id(s.entity),
            entity_label: kg.entity_label(s.entity).to_string(),
        })
        .collect()
}

fn triple_ids(kg: &Kg, t: &Triple) -> [u64; 3] {
    [kg.entity_external_id(t.head), kg.relation_external_id(t.relation), kg.entity_external_id(t.tail)]
}

impl Explanation {
    pub fn to_doc(&self, kg1: &Kg, kg2: &Kg, store: &EmbeddingStore) -> ExplanationDoc {
        ExplanationDoc {
            pair: pair_doc(kg1, kg2, self.pair, Some(store.entity_similarity(self.pair.0, self.pair.1))),
            no_match: self.is_no_match(),
            neighbors: self
                .matched_neighbors
                .iter()
                .map(|&n| pair_doc(kg1, kg2, n, Some(store.entity_similarity(n.0, n.1))))
                .collect(),
            path_pairs: self
                .path_pairs
                .iter()
                .map(|pp| PathPairDoc {
                    similarity: pp.similarity,
                    source_path: path_doc(kg1, &pp.source_path),
                    target_path: path_doc(kg2, &pp.target_path),
                })
                .collect(),
            triples: TriplesDoc {
                source: self.source_triples.iter().map(|t| triple_ids(kg1, t)).collect(),
                target: self.target_triples.iter().map(|t| triple_ids(kg2, t)).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Matrix;
    use crate::kg::{KgBuilder, Side};
    use crate::pairs::PairSet;

    /// Source: c -a-> n, c -b-> n ; target: C -A-> N, C -B-> N.
    fn two_edge_fixture() -> (Kg, Kg, EmbeddingStore) {
        let mut b1 = KgBuilder::new(Side::Source);
        b1.fact("c", "a", "n").fact("c", "b", "n");
        let mut b2 = KgBuilder::new(Side::Target);
        b2.fact("C", "A", "N").fact("C", "B", "N");
        let (kg1, kg2) = (b1.build(), b2.build());
        let ent = Matrix::from_rows(2, [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let rel = Matrix::from_rows(2, [[1.0, 0.2], [0.2, 1.0]]).unwrap();
        let store = EmbeddingStore::new(ent.clone(), ent)
            .unwrap()
            .with_relations(Side::Source, rel.clone())
            .unwrap()
            .with_relations(Side::Target, rel)
            .unwrap();
        (kg1, kg2, store)
    }

    #[test]
    fn no_aligned_neighbors() {
        let (kg1, kg2, store) = two_edge_fixture();
        let ctx = ExplainContext::new(&kg1, &kg2, &store, 1, PathMode::Unsigned).unwrap();
        let pair = (EntityId(0), EntityId(0));
        assert!(matched_neighbors(pair, &kg1, &kg2, &PairSet::new(), 1).unwrap().is_empty());
        let x = ctx.explain(pair, &PairSet::new()).unwrap();
        assert!(x.is_no_match());
        assert_eq!(x.triple_count(), 0);
    }

    #[test]
    fn identical_spaces_match_identically() {
        let (kg1, kg2, store) = two_edge_fixture();
        let ctx = ExplainContext::new(&kg1, &kg2, &store, 1, PathMode::Unsigned).unwrap();
        let pair = (EntityId(0), EntityId(0));
        let aligned: PairSet = [(EntityId(1), EntityId(1))].into_iter().collect();
        let pp = ctx.match_paths(pair, (EntityId(1), EntityId(1))).unwrap();
        assert_eq!(pp.len(), 2);
        for m in &pp {
            assert_eq!(m.source_path.steps[0].relation, m.target_path.steps[0].relation);
        }
        let x = ctx.explain(pair, &aligned).unwrap();
        assert_eq!(x.source_triples, kg1.triples());
        assert_eq!(x.target_triples, kg2.triples());
    }

    #[test]
    fn central_pair_excluded() {
        let mut b1 = KgBuilder::new(Side::Source);
        b1.fact("c", "r", "n");
        let mut b2 = KgBuilder::new(Side::Target);
        b2.fact("C", "r", "N");
        let (kg1, kg2) = (b1.build(), b2.build());
        // n aligned to C, c aligned to N: the neighbor search never returns
        // the center itself.
        let aligned: PairSet = [(EntityId(0), EntityId(0)), (EntityId(1), EntityId(1))].into_iter().collect();
        let got = matched_neighbors((EntityId(0), EntityId(0)), &kg1, &kg2, &aligned, 1).unwrap();
        assert_eq!(got, vec![(EntityId(1), EntityId(1))]);
    }
}
