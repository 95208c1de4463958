//! Entity-pair sets and the TSV pair format (`src_id\ttgt_id`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::{EntityId, Kg};

pub type Pair = (EntityId, EntityId);

/// Read access to a (possibly one-to-many) source → target alignment.
pub trait AlignmentView {
    /// Targets currently aligned with `source`, in ascending order.
    fn targets_of(&self, source: EntityId) -> impl Iterator<Item = EntityId> + '_;

    fn contains(&self, source: EntityId, target: EntityId) -> bool {
        self.targets_of(source).any(|t| t == target)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    forward: BTreeMap<EntityId, BTreeSet<EntityId>>,
}

impl PairSet {
    pub fn new() -> Self {
        PairSet::default()
    }

    pub fn insert(&mut self, source: EntityId, target: EntityId) -> bool {
        self.forward.entry(source).or_default().insert(target)
    }

    pub fn remove(&mut self, source: EntityId, target: EntityId) -> bool {
        let Some(set) = self.forward.get_mut(&source) else { return false };
        let removed = set.remove(&target);
        if set.is_empty() {
            self.forward.remove(&source);
        }
        removed
    }

    pub fn len(&self) -> usize {
        self.forward.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Pairs in (source, target) order.
    pub fn iter(&self) -> impl Iterator<Item = Pair> + '_ {
        self.forward.iter().flat_map(|(&s, ts)| ts.iter().map(move |&t| (s, t)))
    }

    pub fn sources(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.forward.keys().copied()
    }
}

impl FromIterator<Pair> for PairSet {
    fn from_iter<I: IntoIterator<Item = Pair>>(iter: I) -> Self {
        let mut set = PairSet::new();
        for (s, t) in iter {
            set.insert(s, t);
        }
        set
    }
}

impl AlignmentView for PairSet {
    fn targets_of(&self, source: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.forward.get(&source).into_iter().flatten().copied()
    }
}

/// Union of two views, e.g. predictions and seeds.
#[derive(Clone, Copy, Debug)]
pub struct Union<'a, A, B>(pub &'a A, pub &'a B);

impl<A: AlignmentView, B: AlignmentView> AlignmentView for Union<'_, A, B> {
    fn targets_of(&self, source: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        let mut all: Vec<EntityId> = self.0.targets_of(source).chain(self.1.targets_of(source)).collect();
        all.sort_unstable();
        all.dedup();
        all.into_iter()
    }
}

/// Fraction of `gold` pairs present in `predicted`.
pub fn accuracy(predicted: &[Pair], gold: &[Pair]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let predicted: BTreeSet<Pair> = predicted.iter().copied().collect();
    let gold: BTreeSet<Pair> = gold.iter().copied().collect();
    gold.intersection(&predicted).count() as f64 / gold.len() as f64
}

/// Reads `src_id\ttgt_id` lines, resolving ids against the two graphs.
pub fn read_pairs(path: impl AsRef<Path>, kg1: &Kg, kg2: &Kg) -> Result<Vec<Pair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(Error::MalformedLine { path: path.into(), line: line_no });
        }
        let parse = |c: &str| c.parse::<u64>().map_err(|_| Error::MalformedLine { path: path.into(), line: line_no });
        let (s, t) = (parse(cols[0])?, parse(cols[1])?);
        let s_id = kg1
            .entity_by_external_id(s)
            .ok_or(Error::UnknownId { path: path.into(), line: line_no, id: s })?;
        let t_id = kg2
            .entity_by_external_id(t)
            .ok_or(Error::UnknownId { path: path.into(), line: line_no, id: t })?;
        out.push((s_id, t_id));
    }
    Ok(out)
}

pub fn format_pairs(pairs: &[Pair], kg1: &Kg, kg2: &Kg) -> String {
    let mut out = String::new();
    for &(s, t) in pairs {
        let _ = writeln!(out, "{}\t{}", kg1.entity_external_id(s), kg2.entity_external_id(t));
    }
    out
}
