//! Mining of `r1 ¬sameAs r2` rules: whenever `(x, r1, y)` and `(x, r2, z)`
//! hold, `y` and `z` are different entities.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::kg::{EntityId, Kg, RelationId, Side};
use crate::repair::relation::RelationAlignment;

/// An unordered rule over two relations of the same graph (`r1 < r2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NotSameAsRule {
    pub side: Side,
    pub r1: RelationId,
    pub r2: RelationId,
}

/// Rules supported by the graph: the two relations share no (subject,
/// object) pair, and at least one subject uses both with different objects.
/// Relation pairs that the alignment maps onto each other are skipped.
pub fn mine_rules(kg: &Kg, alignment: &RelationAlignment) -> Vec<NotSameAsRule> {
    let mut shared: HashSet<(RelationId, RelationId)> = HashSet::new();
    let mut witnessed: HashSet<(RelationId, RelationId)> = HashSet::new();
    for x in kg.entities() {
        let mut by_rel: BTreeMap<RelationId, BTreeSet<EntityId>> = BTreeMap::new();
        for &(r, o) in kg.outgoing(x) {
            by_rel.entry(r).or_default().insert(o);
        }
        let rels: Vec<_> = by_rel.iter().collect();
        for (i, (r1, o1)) in rels.iter().enumerate() {
            for (r2, o2) in &rels[i + 1..] {
                let key = (**r1, **r2);
                let common = o1.intersection(o2).count();
                if common > 0 {
                    shared.insert(key);
                }
                // A differing object exists unless both sets are the same singleton.
                if o1.len() + o2.len() - common > 1 {
                    witnessed.insert(key);
                }
            }
        }
    }
    let mut rules: Vec<NotSameAsRule> = witnessed
        .difference(&shared)
        .filter(|(r1, r2)| !mapped_onto_each_other(kg.side(), *r1, *r2, alignment))
        .map(|&(r1, r2)| NotSameAsRule { side: kg.side(), r1, r2 })
        .collect();
    rules.sort();
    rules
}

fn mapped_onto_each_other(side: Side, r1: RelationId, r2: RelationId, al: &RelationAlignment) -> bool {
    let counterpart = |r| match side {
        Side::Source => al.target_of(r),
        Side::Target => al.source_of(r),
    };
    matches!((counterpart(r1), counterpart(r2)), (Some(a), Some(b)) if a == b)
}

/// Quadratic reference implementation over all relation pairs.
pub fn mine_rules_naive(kg: &Kg) -> Vec<NotSameAsRule> {
    let mut by_rel: HashMap<RelationId, Vec<(EntityId, EntityId)>> = HashMap::new();
    for t in kg.triples() {
        by_rel.entry(t.relation).or_default().push((t.head, t.tail));
    }
    let mut out = Vec::new();
    for r1 in kg.relations() {
        for r2 in kg.relations().filter(|&r| r > r1) {
            let a = by_rel.get(&r1).map(Vec::as_slice).unwrap_or(&[]);
            let b = by_rel.get(&r2).map(Vec::as_slice).unwrap_or(&[]);
            let overlap = a.iter().any(|p| b.contains(p));
            let witness = a.iter().any(|&(x, y)| b.iter().any(|&(x2, z)| x == x2 && y != z));
            if !overlap && witness {
                out.push(NotSameAsRule { side: kg.side(), r1, r2 });
            }
        }
    }
    out
}
