//! Indexed, immutable triple store for a single knowledge graph.
//!
//! Entities and relations are addressed by dense indices ([`EntityId`],
//! [`RelationId`]) assigned in order of first appearance in the label files.
//! The external integer ids of the on-disk format are kept alongside so every
//! output can be written back in the caller's id space.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported hop bound for neighborhoods and relation paths.
pub const MAX_HOPS: usize = 2;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Source => "source",
            Side::Target => "target",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A relation triple `(head, relation, tail)`. Ordering is (subject, relation, object).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The anchor is the subject of the traversed triple.
    Outgoing,
    /// The anchor is the object of the traversed triple.
    Incoming,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub direction: Direction,
    pub relation: RelationId,
    pub entity: EntityId,
}

/// A simple relation path leaving `center`. Step `i` is anchored at the
/// entity reached by step `i - 1` (or at `center` for the first step).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationPath {
    pub center: EntityId,
    pub steps: Vec<Step>,
}

impl RelationPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn endpoint(&self) -> EntityId {
        self.steps.last().map_or(self.center, |s| s.entity)
    }

    /// The triples traversed by this path, in path order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        let anchors = std::iter::once(self.center).chain(self.steps.iter().map(|s| s.entity));
        anchors.zip(&self.steps).map(|(anchor, step)| match step.direction {
            Direction::Outgoing => Triple::new(anchor, step.relation, step.entity),
            Direction::Incoming => Triple::new(step.entity, step.relation, anchor),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct RelationStats {
    triples: usize,
    subjects: usize,
    objects: usize,
}

/// Label table mapping external ids to dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Labels {
    ids: Vec<u64>,
    labels: Vec<String>,
    index: HashMap<u64, u32>,
}

impl Labels {
    fn insert(&mut self, id: u64, label: String) -> Option<u32> {
        if self.index.contains_key(&id) {
            return None;
        }
        let dense = self.ids.len() as u32;
        self.ids.push(id);
        self.labels.push(label);
        self.index.insert(id, dense);
        Some(dense)
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kg {
    side: Side,
    entities: Labels,
    relations: Labels,
    triples: Vec<Triple>,
    out_index: Vec<Vec<(RelationId, EntityId)>>,
    in_index: Vec<Vec<(RelationId, EntityId)>>,
    stats: Vec<RelationStats>,
}

impl Kg {
    /// Loads a knowledge graph from a triples TSV `(subject, relation, object)`
    /// and two label TSVs `(id, label)`.
    pub fn load(
        triples_path: impl AsRef<Path>,
        entity_labels_path: impl AsRef<Path>,
        relation_labels_path: impl AsRef<Path>,
        side: Side,
    ) -> Result<Kg> {
        let entities = read_labels(entity_labels_path.as_ref())?;
        let relations = read_labels(relation_labels_path.as_ref())?;
        let path = triples_path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut triples = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line_no = line_no + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::MalformedLine { path: path.into(), line: line_no });
            }
            let mut ids = [0u64; 3];
            for (slot, col) in ids.iter_mut().zip(&cols) {
                *slot = col
                    .parse()
                    .map_err(|_| Error::MalformedLine { path: path.into(), line: line_no })?;
            }
            let unknown = |id| Error::UnknownId { path: path.into(), line: line_no, id };
            let head = *entities.index.get(&ids[0]).ok_or_else(|| unknown(ids[0]))?;
            let relation = *relations.index.get(&ids[1]).ok_or_else(|| unknown(ids[1]))?;
            let tail = *entities.index.get(&ids[2]).ok_or_else(|| unknown(ids[2]))?;
            triples.push(Triple::new(EntityId(head), RelationId(relation), EntityId(tail)));
        }
        Ok(Kg::index(side, entities, relations, triples))
    }

    fn index(side: Side, entities: Labels, relations: Labels, mut triples: Vec<Triple>) -> Kg {
        triples.sort_unstable();
        triples.dedup();

        let mut out_index = vec![Vec::new(); entities.len()];
        let mut in_index = vec![Vec::new(); entities.len()];
        for t in &triples {
            out_index[t.head.index()].push((t.relation, t.tail));
            in_index[t.tail.index()].push((t.relation, t.head));
        }
        for adj in &mut in_index {
            adj.sort_unstable();
        }

        let mut subjects = vec![BTreeSet::new(); relations.len()];
        let mut objects = vec![BTreeSet::new(); relations.len()];
        let mut stats = vec![RelationStats::default(); relations.len()];
        for t in &triples {
            let r = t.relation.index();
            stats[r].triples += 1;
            subjects[r].insert(t.head);
            objects[r].insert(t.tail);
        }
        for (r, s) in stats.iter_mut().enumerate() {
            s.subjects = subjects[r].len();
            s.objects = objects[r].len();
        }

        Kg { side, entities, relations, triples, out_index, in_index, stats }
    }

    /// A copy of this graph that keeps only the triples accepted by `keep`.
    /// Entity and relation tables are unchanged.
    pub fn retain_triples(&self, mut keep: impl FnMut(&Triple) -> bool) -> Kg {
        let triples = self.triples.iter().copied().filter(|t| keep(t)).collect();
        Kg::index(self.side, self.entities.clone(), self.relations.clone(), triples)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    /// All triples, sorted and deduplicated.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.binary_search(triple).is_ok()
    }

    pub fn entity_external_id(&self, e: EntityId) -> u64 {
        self.entities.ids[e.index()]
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        &self.entities.labels[e.index()]
    }

    pub fn entity_by_external_id(&self, id: u64) -> Option<EntityId> {
        self.entities.index.get(&id).map(|&i| EntityId(i))
    }

    pub fn entity_by_label(&self, label: &str) -> Option<EntityId> {
        self.entities.labels.iter().position(|l| l == label).map(|i| EntityId(i as u32))
    }

    pub fn relation_external_id(&self, r: RelationId) -> u64 {
        self.relations.ids[r.index()]
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        &self.relations.labels[r.index()]
    }

    pub fn relation_by_external_id(&self, id: u64) -> Option<RelationId> {
        self.relations.index.get(&id).map(|&i| RelationId(i))
    }

    pub fn relation_by_label(&self, label: &str) -> Option<RelationId> {
        self.relations.labels.iter().position(|l| l == label).map(|i| RelationId(i as u32))
    }

    pub fn has_entity(&self, e: EntityId) -> bool {
        e.index() < self.entities.len()
    }

    pub(crate) fn check_entity(&self, e: EntityId) -> Result<()> {
        if self.has_entity(e) {
            Ok(())
        } else {
            Err(Error::UnknownEntity { side: self.side, entity: e })
        }
    }

    /// `(relation, object)` pairs of triples whose subject is `e`, sorted.
    pub fn outgoing(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.out_index[e.index()]
    }

    /// `(relation, subject)` pairs of triples whose object is `e`, sorted.
    pub fn incoming(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.in_index[e.index()]
    }

    pub fn relation_triple_count(&self, r: RelationId) -> usize {
        self.stats.get(r.index()).map_or(0, |s| s.triples)
    }

    /// Distinct subjects of `r` divided by the number of `r` triples.
    pub fn functionality(&self, r: RelationId) -> Result<f64> {
        match self.stats.get(r.index()) {
            Some(s) if s.triples > 0 => Ok(s.subjects as f64 / s.triples as f64),
            _ => Err(Error::UnknownRelation(r)),
        }
    }

    /// Distinct objects of `r` divided by the number of `r` triples.
    pub fn inverse_functionality(&self, r: RelationId) -> Result<f64> {
        match self.stats.get(r.index()) {
            Some(s) if s.triples > 0 => Ok(s.objects as f64 / s.triples as f64),
            _ => Err(Error::UnknownRelation(r)),
        }
    }

    /// Undirected hop distance of every entity within `h` hops of `e`
    /// (excluding `e`), sorted by entity.
    pub fn entities_within(&self, e: EntityId, h: usize) -> Vec<(EntityId, usize)> {
        let mut dist: HashMap<EntityId, usize> = HashMap::new();
        dist.insert(e, 0);
        let mut queue = VecDeque::from([e]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            if d == h {
                continue;
            }
            let adj = self.out_index[x.index()].iter().chain(&self.in_index[x.index()]);
            for &(_, y) in adj {
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(y) {
                    slot.insert(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist.remove(&e);
        let mut out: Vec<_> = dist.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Triples reachable from `e` by an undirected expansion of at most `h`
    /// edges, sorted by (subject, relation, object).
    pub fn neighborhood_triples(&self, e: EntityId, h: usize) -> Result<Vec<Triple>> {
        check_hops(h)?;
        self.check_entity(e)?;
        let mut frontier = vec![e];
        frontier.extend(
            self.entities_within(e, h - 1).into_iter().map(|(x, _)| x),
        );
        let mut set = BTreeSet::new();
        for x in frontier {
            for &(r, o) in self.outgoing(x) {
                set.insert(Triple::new(x, r, o));
            }
            for &(r, s) in self.incoming(x) {
                set.insert(Triple::new(s, r, x));
            }
        }
        Ok(set.into_iter().collect())
    }

    /// All simple relation paths of length `1..=h` leaving `e`, following
    /// edges in both directions. Sorted lexicographically by steps.
    pub fn enumerate_paths(&self, e: EntityId, h: usize) -> Result<Vec<RelationPath>> {
        check_hops(h)?;
        self.check_entity(e)?;
        let mut out = Vec::new();
        let mut steps = Vec::with_capacity(h);
        self.extend_paths(e, e, h, &mut steps, &mut out);
        out.sort();
        Ok(out)
    }

    fn extend_paths(
        &self,
        center: EntityId,
        anchor: EntityId,
        remaining: usize,
        steps: &mut Vec<Step>,
        out: &mut Vec<RelationPath>,
    ) {
        if remaining == 0 {
            return;
        }
        let outgoing = self.outgoing(anchor).iter().map(|&(r, x)| (Direction::Outgoing, r, x));
        let incoming = self.incoming(anchor).iter().map(|&(r, x)| (Direction::Incoming, r, x));
        for (direction, relation, entity) in outgoing.chain(incoming) {
            if entity == center || steps.iter().any(|s| s.entity == entity) {
                continue;
            }
            steps.push(Step { direction, relation, entity });
            out.push(RelationPath { center, steps: steps.clone() });
            self.extend_paths(center, entity, remaining - 1, steps, out);
            steps.pop();
        }
    }
}

pub(crate) fn check_hops(h: usize) -> Result<()> {
    if (1..=MAX_HOPS).contains(&h) {
        Ok(())
    } else {
        Err(Error::InvalidHop(h))
    }
}

fn read_labels(path: &Path) -> Result<Labels> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Labels::default();
    for (line_no, line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::MalformedLine { path: path.into(), line: line_no })?;
        let id: u64 = id
            .trim()
            .parse()
            .map_err(|_| Error::MalformedLine { path: path.into(), line: line_no })?;
        if labels.insert(id, label.trim().to_string()).is_none() {
            return Err(Error::DuplicateId { path: path.into(), line: line_no, id });
        }
    }
    Ok(labels)
}

/// In-memory construction of a [`Kg`], used by the synthetic generator,
/// fixtures and tests. External ids are assigned sequentially from the
/// configured offsets.
#[derive(Debug)]
pub struct KgBuilder {
    side: Side,
    entity_offset: u64,
    relation_offset: u64,
    entities: Labels,
    relations: Labels,
    triples: Vec<Triple>,
}

impl KgBuilder {
    pub fn new(side: Side) -> Self {
        KgBuilder::with_offsets(side, 0, 0)
    }

    pub fn with_offsets(side: Side, entity_offset: u64, relation_offset: u64) -> Self {
        KgBuilder {
            side,
            entity_offset,
            relation_offset,
            entities: Labels::default(),
            relations: Labels::default(),
            triples: Vec::new(),
        }
    }

    /// Returns the existing entity with this label, or adds a new one.
    pub fn entity(&mut self, label: &str) -> EntityId {
        if let Some(i) = self.entities.labels.iter().position(|l| l == label) {
            return EntityId(i as u32);
        }
        let id = self.entity_offset + self.entities.len() as u64;
        EntityId(self.entities.insert(id, label.to_string()).expect("fresh id"))
    }

    /// Adds an entity without checking for an existing label.
    pub fn push_entity(&mut self, label: String) -> EntityId {
        let id = self.entity_offset + self.entities.len() as u64;
        EntityId(self.entities.insert(id, label).expect("fresh id"))
    }

    pub fn relation(&mut self, label: &str) -> RelationId {
        if let Some(i) = self.relations.labels.iter().position(|l| l == label) {
            return RelationId(i as u32);
        }
        let id = self.relation_offset + self.relations.len() as u64;
        RelationId(self.relations.insert(id, label.to_string()).expect("fresh id"))
    }

    pub fn triple(&mut self, head: EntityId, relation: RelationId, tail: EntityId) -> &mut Self {
        self.triples.push(Triple::new(head, relation, tail));
        self
    }

    /// Adds a triple by labels, creating entities and relations as needed.
    pub fn fact(&mut self, head: &str, relation: &str, tail: &str) -> &mut Self {
        let h = self.entity(head);
        let r = self.relation(relation);
        let t = self.entity(tail);
        self.triple(h, r, t)
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn build(self) -> Kg {
        Kg::index(self.side, self.entities, self.relations, self.triples)
    }
}

/// Writes the graph in the TSV layout read by [`Kg::load`].
pub fn write_kg(kg: &Kg, triples: &mut String, entities: &mut String, relations: &mut String) {
    use std::fmt::Write;
    for e in kg.entities() {
        let _ = writeln!(entities, "{}\t{}", kg.entity_external_id(e), kg.entity_label(e));
    }
    for r in kg.relations() {
        let _ = writeln!(relations, "{}\t{}", kg.relation_external_id(r), kg.relation_label(r));
    }
    for t in kg.triples() {
        let _ = writeln!(
            triples,
            "{}\t{}\t{}",
            kg.entity_external_id(t.head),
            kg.relation_external_id(t.relation),
            kg.entity_external_id(t.tail)
        );
    }
}
