//! Cross-graph triples and relation-alignment conflict detection.
//!
//! Triples around the entities of strong ADG edges are rewritten by swapping
//! those entities, and aligned relations, into the other graph. Applying the mined
//! `¬sameAs` rules to the original and rewritten triples derives pairs that
//! cannot be equivalent.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::adg::{Adg, EdgeClass};
use crate::kg::{EntityId, Kg, RelationId, Side};
use crate::pairs::Pair;
use crate::repair::relation::RelationAlignment;
use crate::repair::rules::NotSameAsRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub side: Side,
    pub entity: EntityId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelNode {
    pub side: Side,
    pub relation: RelationId,
}

/// A triple whose elements may come from either graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MixedTriple {
    pub head: Node,
    pub relation: RelNode,
    pub tail: Node,
}

impl MixedTriple {
    fn native(side: Side, h: EntityId, r: RelationId, t: EntityId) -> Self {
        MixedTriple {
            head: Node { side, entity: h },
            relation: RelNode { side, relation: r },
            tail: Node { side, entity: t },
        }
    }
}

/// Entity alignment indexed in both directions.
#[derive(Clone, Debug, Default)]
pub struct BiIndex {
    forward: BTreeMap<EntityId, Vec<EntityId>>,
    backward: BTreeMap<EntityId, Vec<EntityId>>,
}

impl BiIndex {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Self {
        let mut idx = BiIndex::default();
        for (s, t) in pairs {
            idx.forward.entry(s).or_default().push(t);
            idx.backward.entry(t).or_default().push(s);
        }
        for v in idx.forward.values_mut().chain(idx.backward.values_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        idx
    }

    pub fn counterparts(&self, node: Node) -> impl Iterator<Item = Node> + '_ {
        let map = match node.side {
            Side::Source => &self.forward,
            Side::Target => &self.backward,
        };
        let side = node.side.other();
        map.get(&node.entity).into_iter().flatten().map(move |&entity| Node { side, entity })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossTriples {
    /// Native 1-hop triples of the strong-edge entities, at most the budget.
    pub consulted: Vec<MixedTriple>,
    /// Every variant with at least one element swapped for its counterpart.
    pub swapped: Vec<MixedTriple>,
}

/// The central pair followed by the strong-edge neighbor pairs. Empty when
/// the graph has no strong edge.
pub fn strong_pairs(adg: &Adg) -> Vec<Pair> {
    if !adg.has_strong_edges() {
        return Vec::new();
    }
    let mut pairs = vec![adg.central.pair];
    for e in adg.edges.iter().filter(|e| e.class == EdgeClass::Strong) {
        let p = adg.neighbors[e.neighbor].pair;
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    pairs
}

/// Only the strong-edge pairs of `adg` are used as entity counterparts, so
/// predictions outside the graph never feed the rewriting.
pub fn cross_kg_triples(adg: &Adg, kg1: &Kg, kg2: &Kg, relations: &RelationAlignment, budget: usize) -> CrossTriples {
    let pairs = strong_pairs(adg);
    let entities = BiIndex::new(pairs.iter().copied());
    let nodes = pairs
        .iter()
        .map(|p| Node { side: Side::Source, entity: p.0 })
        .chain(pairs.iter().map(|p| Node { side: Side::Target, entity: p.1 }));
    let mut seen = HashSet::new();
    let mut consulted = Vec::new();
    'outer: for node in nodes {
        let kg = if node.side == Side::Source { kg1 } else { kg2 };
        let out = kg.outgoing(node.entity).iter().map(|&(r, t)| (node.entity, r, t));
        let inc = kg.incoming(node.entity).iter().map(|&(r, h)| (h, r, node.entity));
        for (h, r, t) in out.chain(inc) {
            if consulted.len() >= budget {
                break 'outer;
            }
            let mt = MixedTriple::native(node.side, h, r, t);
            if seen.insert(mt) {
                consulted.push(mt);
            }
        }
    }

    let mut swapped = BTreeSet::new();
    for mt in &consulted {
        let heads: Vec<Node> = std::iter::once(mt.head).chain(entities.counterparts(mt.head)).collect();
        let tails: Vec<Node> = std::iter::once(mt.tail).chain(entities.counterparts(mt.tail)).collect();
        let mut rels = vec![mt.relation];
        let other = match mt.relation.side {
            Side::Source => relations.target_of(mt.relation.relation),
            Side::Target => relations.source_of(mt.relation.relation),
        };
        if let Some(r) = other {
            rels.push(RelNode { side: mt.relation.side.other(), relation: r });
        }
        for &head in &heads {
            for &relation in &rels {
                for &tail in &tails {
                    let v = MixedTriple { head, relation, tail };
                    if v != *mt {
                        swapped.insert(v);
                    }
                }
            }
        }
    }
    CrossTriples { consulted, swapped: swapped.into_iter().collect() }
}

/// Inequality facts `{y, z}` derived by one round of rule application, each
/// stored with the smaller node first.
pub fn derive_not_same_as(pool: &[MixedTriple], rules: &[NotSameAsRule]) -> BTreeSet<(Node, Node)> {
    let rule_set: HashSet<(Side, RelationId, RelationId)> = rules.iter().map(|r| (r.side, r.r1, r.r2)).collect();
    let mut by_head: BTreeMap<Node, BTreeMap<RelNode, BTreeSet<Node>>> = BTreeMap::new();
    for t in pool {
        by_head.entry(t.head).or_default().entry(t.relation).or_default().insert(t.tail);
    }
    let mut facts = BTreeSet::new();
    for rels in by_head.values() {
        let rels: Vec<_> = rels.iter().collect();
        for (i, (ra, ya)) in rels.iter().enumerate() {
            for (rb, yb) in &rels[i + 1..] {
                if ra.side != rb.side || !rule_set.contains(&(ra.side, ra.relation, rb.relation)) {
                    continue;
                }
                for &y in ya.iter() {
                    for &z in yb.iter() {
                        if y != z {
                            facts.insert(if y < z { (y, z) } else { (z, y) });
                        }
                    }
                }
            }
        }
    }
    facts
}

/// Outcome of checking one ADG against the relation alignment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationConflicts {
    /// Derived cross-graph inequalities, as (source, target) pairs.
    pub derived: Vec<Pair>,
    /// Neighbor pairs of the ADG that were derived unequal.
    pub pruned: Vec<Pair>,
    /// True when the central pair itself was derived unequal.
    pub central: bool,
}

/// Read-only inputs for relation conflict detection.
pub struct ConflictDetector<'a> {
    pub kg1: &'a Kg,
    pub kg2: &'a Kg,
    pub relations: &'a RelationAlignment,
    pub rules: &'a [NotSameAsRule],
    pub budget: usize,
}

impl ConflictDetector<'_> {
    pub fn cross_triples(&self, adg: &Adg) -> CrossTriples {
        cross_kg_triples(adg, self.kg1, self.kg2, self.relations, self.budget)
    }

    pub fn detect(&self, adg: &Adg) -> RelationConflicts {
        let cross = self.cross_triples(adg);
        let mut pool = cross.consulted;
        pool.extend(cross.swapped);
        let derived: Vec<Pair> = derive_not_same_as(&pool, self.rules)
            .into_iter()
            .filter(|(a, b)| a.side != b.side)
            .map(|(a, b)| (a.entity, b.entity))
            .collect();
        let derived_set: BTreeSet<Pair> = derived.iter().copied().collect();
        let pruned = adg.neighbors.iter().map(|n| n.pair).filter(|p| derived_set.contains(p)).collect();
        let central = derived_set.contains(&adg.central.pair);
        RelationConflicts { derived, pruned, central }
    }
}
