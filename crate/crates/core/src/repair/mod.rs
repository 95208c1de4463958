//! Alignment repair: relation-alignment conflicts, one-to-many conflicts and
//! low-confidence pairs are resolved in turn, then any source left without a
//! target is filled greedily by similarity.

pub mod cross;
pub mod relation;
pub mod rules;
pub mod scorer;
pub mod state;

mod stages;

use std::collections::BTreeSet;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adg::{sigmoid, Adg, AdgConfig};
use crate::embed::{similarity_topk, EmbeddingStore, PathMode};
use crate::error::{Error, Result};
use crate::explain::{ExplainContext, Explanation};
use crate::kg::{EntityId, Kg};
use crate::pairs::Pair;

pub use cross::{BiIndex, ConflictDetector, CrossTriples, MixedTriple, Node, RelNode, RelationConflicts};
pub use relation::{align_relations, RelationAlignment, RelationSource};
pub use rules::{mine_rules, mine_rules_naive, NotSameAsRule};
pub use scorer::Scorer;
pub use state::{AlignmentState, Assignment, Provenance};

/// Which repair strategies run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    #[serde(rename = "cr1")]
    pub relation: bool,
    #[serde(rename = "cr2")]
    pub one_to_many: bool,
    #[serde(rename = "cr3")]
    pub low_confidence: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages { relation: true, one_to_many: true, low_confidence: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub h: usize,
    /// Candidates tried per source in both conflict resolution loops.
    pub k: usize,
    pub adg: AdgConfig,
    /// Low-confidence threshold; defaults to `sigmoid(theta)`.
    pub beta: Option<f64>,
    /// Weight of entity similarity in the low-confidence candidate score.
    pub lambda: f64,
    /// Cap on the 1-hop triples consulted per ADG during relation repair.
    pub triple_budget: usize,
    /// Cap on the neighborhood candidates scored per unaligned source.
    pub candidate_cap: usize,
    pub path_mode: PathMode,
    pub relation_source: RelationSource,
    pub stages: Stages,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            h: 2,
            k: 5,
            adg: AdgConfig::default(),
            beta: None,
            lambda: 1.0,
            triple_budget: 200,
            candidate_cap: 20,
            path_mode: PathMode::Unsigned,
            relation_source: RelationSource::Model,
            stages: Stages::default(),
        }
    }
}

impl RepairConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| sigmoid(self.adg.theta))
    }

    pub fn validate(&self) -> Result<()> {
        self.adg.validate()?;
        crate::kg::check_hops(self.h)?;
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if let Some(b) = self.beta {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("beta must lie in [0, 1], got {b}")));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if self.candidate_cap == 0 {
            return Err(Error::InvalidConfig("candidate_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inputs of a repair run.
pub struct RepairInput<'a> {
    pub kg1: &'a Kg,
    pub kg2: &'a Kg,
    pub store: &'a EmbeddingStore,
    pub seeds: &'a [Pair],
    /// The raw, possibly one-to-many, predicted alignment.
    pub predictions: &'a [Pair],
    /// Sources to align. Those without a prediction start out unaligned.
    pub sources: &'a [EntityId],
    /// Targets that may be assigned. Seed targets are ignored.
    pub targets: &'a [EntityId],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Relation,
    OneToMany,
    LowConfidence,
    Fill,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RelationReport {
    pub relation_pairs: usize,
    pub rules: usize,
    pub adgs_checked: usize,
    pub derived_inequalities: usize,
    pub pruned_neighbors: usize,
    pub flagged_pairs: usize,
}

/// One eviction in favour of a pair with higher confidence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Swap {
    pub target: EntityId,
    pub winner: EntityId,
    pub loser: EntityId,
    pub winner_score: f64,
    pub loser_score: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OneToManyReport {
    pub contested_targets: usize,
    pub evicted: usize,
    /// Size of the unaligned set at the start of each round.
    pub rounds: Vec<usize>,
    pub swaps: Vec<Swap>,
    pub unresolved: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LowConfidenceReport {
    pub beta: f64,
    pub stripped: usize,
    /// Size of the unaligned set after each strip.
    pub rounds: Vec<usize>,
    pub swaps: Vec<Swap>,
    pub unresolved: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FillReport {
    pub filled: usize,
    pub unaligned: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RepairReport {
    pub relation: Option<RelationReport>,
    pub one_to_many: Option<OneToManyReport>,
    pub low_confidence: Option<LowConfidenceReport>,
    pub fill: FillReport,
}

#[derive(Clone, Debug)]
pub struct PairRecord {
    pub pair: Pair,
    pub provenance: Provenance,
    pub confidence_before: Option<f64>,
    pub confidence_after: f64,
}

pub struct RepairOutcome {
    /// Final non-seed pairs in source order.
    pub alignment: Vec<Pair>,
    pub unaligned: Vec<EntityId>,
    /// The alignment after each stage that ran, starting with the input.
    pub stages: Vec<(Stage, Vec<Pair>)>,
    pub relation_alignment: RelationAlignment,
    pub rules: Vec<NotSameAsRule>,
    /// Predicted pairs derived unequal by relation repair.
    pub flagged: BTreeSet<Pair>,
    pub records: Vec<PairRecord>,
    pub explanations: Vec<Explanation>,
    pub adgs: Vec<Adg>,
    pub report: RepairReport,
}

/// Runs the enabled repair stages over `input.predictions`.
pub fn repair(input: &RepairInput<'_>, cfg: &RepairConfig) -> Result<RepairOutcome> {
    cfg.validate()?;
    let ctx = ExplainContext::new(input.kg1, input.kg2, input.store, cfg.h, cfg.path_mode)?;
    let mut scorer = Scorer::new(&ctx, cfg.adg);
    let mut state = AlignmentState::new(input.seeds, input.predictions);
    let mut unaligned: BTreeSet<EntityId> = input
        .sources
        .iter()
        .copied()
        .filter(|&s| !state.is_seed_source(s) && state.target_of(s).is_none())
        .collect();
    let mut flagged = BTreeSet::new();
    let mut report = RepairReport::default();
    let mut snapshots = vec![(Stage::Raw, state.pairs())];

    let before: Vec<(Pair, f64)> = state
        .pairs()
        .par_iter()
        .map(|&p| scorer.confidence(p, &state).map(|c| (p, c)))
        .collect::<Result<_>>()?;

    let mut relation_alignment = RelationAlignment::default();
    let mut rules = Vec::new();
    if cfg.stages.relation {
        let (rep, al, r) = stages::relation_stage(input, cfg, &mut scorer, &state, &mut flagged)?;
        info!("relation repair: {} rules, {} pairs flagged", rep.rules, rep.flagged_pairs);
        report.relation = Some(rep);
        relation_alignment = al;
        rules = r;
        snapshots.push((Stage::Relation, state.pairs()));
    }

    let targets: Vec<EntityId> = {
        let mut t: Vec<EntityId> = input.targets.iter().copied().filter(|&t| !state.is_seed_target(t)).collect();
        t.sort_unstable();
        t.dedup();
        t
    };

    if cfg.stages.one_to_many {
        let sources: Vec<EntityId> = state.pairs().iter().map(|p| p.0).chain(unaligned.iter().copied()).collect();
        let topk = if targets.is_empty() || sources.is_empty() {
            None
        } else {
            Some(similarity_topk(input.store, &sources, &targets, cfg.k)?)
        };
        let rep = stages::one_to_many(&scorer, &mut state, topk.as_ref(), cfg, &mut unaligned)?;
        info!("one-to-many repair: {} contested targets, {} swaps", rep.contested_targets, rep.swaps.len());
        report.one_to_many = Some(rep);
        snapshots.push((Stage::OneToMany, state.pairs()));
    }

    if cfg.stages.low_confidence {
        let rep = stages::low_confidence(&scorer, &mut state, cfg, &mut unaligned, &flagged)?;
        info!("low-confidence repair: {} pairs stripped", rep.stripped);
        report.low_confidence = Some(rep);
        snapshots.push((Stage::LowConfidence, state.pairs()));
    }

    report.fill = stages::fill(&scorer, &mut state, &targets, &mut unaligned);
    if report.fill.unaligned > 0 {
        warn!("{} sources left without a target", report.fill.unaligned);
    }
    snapshots.push((Stage::Fill, state.pairs()));

    let alignment = state.pairs();
    let graphs: Vec<(Explanation, Adg)> =
        alignment.par_iter().map(|&p| scorer.explain(p, &state)).collect::<Result<_>>()?;
    let before: std::collections::BTreeMap<Pair, f64> = before.into_iter().collect();
    let records = alignment
        .iter()
        .zip(&graphs)
        .map(|(&pair, (_, adg))| PairRecord {
            pair,
            provenance: state.assignment(pair.0).map(|a| a.provenance).unwrap_or(Provenance::Predicted),
            confidence_before: before.get(&pair).copied(),
            confidence_after: adg.confidence,
        })
        .collect();
    let (explanations, adgs) = graphs.into_iter().unzip();
    Ok(RepairOutcome {
        alignment,
        unaligned: unaligned.into_iter().collect(),
        stages: snapshots,
        relation_alignment,
        rules,
        flagged,
        records,
        explanations,
        adgs,
        report,
    })
}
