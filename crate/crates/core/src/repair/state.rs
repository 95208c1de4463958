//! Mutable alignment state shared by the repair stages.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::kg::EntityId;
use crate::pairs::{AlignmentView, Pair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Predicted,
    Repaired,
    Filled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub target: EntityId,
    pub provenance: Provenance,
}

/// Seed pairs plus the current, possibly one-to-many, predicted pairs.
///
/// Seeds are fixed at construction; the mutating methods only ever touch
/// non-seed sources, so a seed pair can never be evicted.
#[derive(Clone, Debug, Default)]
pub struct AlignmentState {
    seeds: BTreeMap<EntityId, BTreeSet<EntityId>>,
    seed_targets: BTreeSet<EntityId>,
    current: BTreeMap<EntityId, Assignment>,
    reverse: BTreeMap<EntityId, BTreeSet<EntityId>>,
}

impl AlignmentState {
    /// Predictions for seed sources are dropped; a source predicted several
    /// times keeps its first target.
    pub fn new(seeds: &[Pair], predictions: &[Pair]) -> Self {
        let mut state = AlignmentState::default();
        for &(s, t) in seeds {
            state.seeds.entry(s).or_default().insert(t);
            state.seed_targets.insert(t);
        }
        for &(s, t) in predictions {
            if !state.seeds.contains_key(&s) && !state.current.contains_key(&s) {
                state.assign(s, t, Provenance::Predicted);
            }
        }
        state
    }

    pub fn is_seed_source(&self, e: EntityId) -> bool {
        self.seeds.contains_key(&e)
    }

    pub fn is_seed_target(&self, e: EntityId) -> bool {
        self.seed_targets.contains(&e)
    }

    pub fn assignment(&self, source: EntityId) -> Option<Assignment> {
        self.current.get(&source).copied()
    }

    pub fn target_of(&self, source: EntityId) -> Option<EntityId> {
        self.current.get(&source).map(|a| a.target)
    }

    /// Non-seed sources currently aligned with `target`.
    pub fn incumbents(&self, target: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.reverse.get(&target).into_iter().flatten().copied()
    }

    /// True when neither a seed nor a predicted pair uses `target`.
    pub fn is_free(&self, target: EntityId) -> bool {
        !self.is_seed_target(target) && !self.reverse.contains_key(&target)
    }

    /// Aligns a non-seed source, replacing any previous target.
    pub fn assign(&mut self, source: EntityId, target: EntityId, provenance: Provenance) {
        debug_assert!(!self.is_seed_source(source));
        self.unassign(source);
        self.current.insert(source, Assignment { target, provenance });
        self.reverse.entry(target).or_default().insert(source);
    }

    pub fn unassign(&mut self, source: EntityId) -> Option<EntityId> {
        let old = self.current.remove(&source)?;
        if let Some(set) = self.reverse.get_mut(&old.target) {
            set.remove(&source);
            if set.is_empty() {
                self.reverse.remove(&old.target);
            }
        }
        Some(old.target)
    }

    /// Non-seed pairs in source order.
    pub fn pairs(&self) -> Vec<Pair> {
        self.current.iter().map(|(&s, a)| (s, a.target)).collect()
    }

    pub fn assignments(&self) -> impl Iterator<Item = (EntityId, Assignment)> + '_ {
        self.current.iter().map(|(&s, &a)| (s, a))
    }

    pub fn seed_pairs(&self) -> Vec<Pair> {
        self.seeds.iter().flat_map(|(&s, ts)| ts.iter().map(move |&t| (s, t))).collect()
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// Targets claimed by more than one source, or by a source and a seed.
    pub fn contested_targets(&self) -> Vec<EntityId> {
        self.reverse
            .iter()
            .filter(|(t, srcs)| srcs.len() > 1 || self.seed_targets.contains(t))
            .map(|(&t, _)| t)
            .collect()
    }

    /// True when no target is shared between two pairs, seeds included.
    pub fn is_injective(&self) -> bool {
        self.contested_targets().is_empty()
    }
}

impl AlignmentView for AlignmentState {
    fn targets_of(&self, source: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        let seeds = self.seeds.get(&source).into_iter().flatten().copied();
        seeds.chain(self.current.get(&source).map(|a| a.target))
    }
}
