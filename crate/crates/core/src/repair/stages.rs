//! The individual repair stages. Each one mutates the shared state and
//! reports what it did.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use log::warn;
use rayon::prelude::*;

use crate::embed::SimilarityTopK;
use crate::error::{Error, Result};
use crate::kg::EntityId;
use crate::pairs::Pair;
use crate::repair::cross::ConflictDetector;
use crate::repair::relation::{align_relations, relation_tables, RelationAlignment};
use crate::repair::rules::{mine_rules, NotSameAsRule};
use crate::repair::{
    AlignmentState, FillReport, LowConfidenceReport, OneToManyReport, Provenance, RelationReport, RepairConfig,
    RepairInput, Scorer, Swap,
};

/// Aligns relations, mines rules in both graphs and checks every predicted
/// pair's ADG. Neighbor pairs derived unequal are pruned from that ADG;
/// a central pair derived unequal is flagged for the low-confidence stage.
pub(super) fn relation_stage(
    input: &RepairInput<'_>,
    cfg: &RepairConfig,
    scorer: &mut Scorer<'_>,
    state: &AlignmentState,
    flagged: &mut BTreeSet<Pair>,
) -> Result<(RelationReport, RelationAlignment, Vec<NotSameAsRule>)> {
    let (t1, t2) = relation_tables(input.store, input.kg1, input.kg2, cfg.relation_source)?;
    let alignment = match align_relations(&t1, &t2) {
        Ok(a) => a,
        Err(Error::NoRelationVectors) => {
            warn!("no relation vectors on one side; relation repair skipped");
            return Ok((RelationReport::default(), RelationAlignment::default(), Vec::new()));
        }
        Err(e) => return Err(e),
    };
    let mut rules = mine_rules(input.kg1, &alignment);
    rules.extend(mine_rules(input.kg2, &alignment));

    let pairs = state.pairs();
    let detector = ConflictDetector {
        kg1: input.kg1,
        kg2: input.kg2,
        relations: &alignment,
        rules: &rules,
        budget: cfg.triple_budget,
    };
    let found: Vec<_> = {
        let scorer = &*scorer;
        pairs
            .par_iter()
            .map(|&p| Ok((p, detector.detect(&scorer.adg(p, state)?))))
            .collect::<Result<_>>()?
    };

    let seeds: BTreeSet<Pair> = state.seed_pairs().into_iter().collect();
    let mut rep = RelationReport {
        relation_pairs: alignment.len(),
        rules: rules.len(),
        adgs_checked: pairs.len(),
        ..Default::default()
    };
    for (pair, c) in found {
        rep.derived_inequalities += c.derived.len();
        let pruned: Vec<Pair> = c.pruned.into_iter().filter(|p| !seeds.contains(p)).collect();
        rep.pruned_neighbors += pruned.len();
        scorer.exclude_neighbors(pair, pruned);
        if c.central {
            flagged.insert(pair);
        }
    }
    rep.flagged_pairs = flagged.len();
    Ok((rep, alignment, rules))
}

/// Descending by score, then ascending by entity id.
fn by_score(a: &(EntityId, f64), b: &(EntityId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Resolves one-to-many conflicts: every contested target keeps its most
/// confident source, then evicted sources walk their top-k candidates and
/// claim a target when it is free or when they beat the incumbent.
pub(super) fn one_to_many(
    scorer: &Scorer<'_>,
    state: &mut AlignmentState,
    topk: Option<&SimilarityTopK>,
    cfg: &RepairConfig,
    unaligned: &mut BTreeSet<EntityId>,
) -> Result<OneToManyReport> {
    let mut rep = OneToManyReport::default();
    let contested = state.contested_targets();
    rep.contested_targets = contested.len();
    let decisions: Vec<Vec<(EntityId, f64)>> = {
        let state = &*state;
        contested
            .par_iter()
            .map(|&t| {
                let mut scored: Vec<(EntityId, f64)> = state
                    .incumbents(t)
                    .map(|s| scorer.confidence((s, t), state).map(|c| (s, c)))
                    .collect::<Result<_>>()?;
                scored.sort_by(by_score);
                // A seed already owns the target: nobody keeps it.
                let keep = usize::from(!state.is_seed_target(t));
                Ok(scored.split_off(keep.min(scored.len())))
            })
            .collect::<Result<_>>()?
    };
    for evicted in decisions.into_iter().flatten() {
        state.unassign(evicted.0);
        unaligned.insert(evicted.0);
        rep.evicted += 1;
    }

    let mut pending = std::mem::take(unaligned);
    while !pending.is_empty() {
        let last = pending.len();
        rep.rounds.push(last);
        let mut next = BTreeSet::new();
        for &e1 in &pending {
            let row = topk.and_then(|t| t.get(e1)).unwrap_or(&[]);
            for &(e2, _) in row.iter().take(cfg.k) {
                if state.is_seed_target(e2) {
                    continue;
                }
                let incumbents: Vec<EntityId> = state.incumbents(e2).collect();
                if incumbents.is_empty() {
                    state.assign(e1, e2, Provenance::Repaired);
                    break;
                }
                let g1 = scorer.confidence((e1, e2), state)?;
                let mut best_incumbent = f64::NEG_INFINITY;
                for &inc in &incumbents {
                    best_incumbent = best_incumbent.max(scorer.confidence((inc, e2), state)?);
                }
                if g1 > best_incumbent {
                    for inc in incumbents {
                        state.unassign(inc);
                        next.insert(inc);
                        rep.swaps.push(Swap {
                            target: e2,
                            winner: e1,
                            loser: inc,
                            winner_score: g1,
                            loser_score: best_incumbent,
                        });
                    }
                    state.assign(e1, e2, Provenance::Repaired);
                    break;
                }
            }
            if state.target_of(e1).is_none() {
                next.insert(e1);
            }
        }
        pending = next;
        if pending.len() >= last {
            break;
        }
    }
    rep.unresolved = pending.len();
    *unaligned = pending;
    Ok(rep)
}

/// Targets within `h` hops of the targets aligned to `e1`'s neighbors,
/// excluding seed targets, nearest to `e1` first.
fn candidates(scorer: &Scorer<'_>, state: &AlignmentState, e1: EntityId, cap: usize) -> Vec<EntityId> {
    use crate::pairs::AlignmentView;
    let h = scorer.ctx.hops();
    let mut set = BTreeSet::new();
    for (n1, _) in scorer.ctx.kg1.entities_within(e1, h) {
        for n2 in state.targets_of(n1) {
            for (t, _) in scorer.ctx.kg2.entities_within(n2, h) {
                if !state.is_seed_target(t) {
                    set.insert(t);
                }
            }
        }
    }
    let mut scored: Vec<(EntityId, f64)> = set.into_iter().map(|t| (t, scorer.similarity((e1, t)))).collect();
    scored.sort_by(by_score);
    scored.truncate(cap);
    scored.into_iter().map(|(t, _)| t).collect()
}

/// Strips pairs whose confidence is below beta and re-aligns the stripped
/// sources by confidence plus weighted similarity, until the set of
/// unaligned sources stops shrinking. Flagged pairs still in place are
/// stripped in the first round whatever their confidence.
pub(super) fn low_confidence(
    scorer: &Scorer<'_>,
    state: &mut AlignmentState,
    cfg: &RepairConfig,
    unaligned: &mut BTreeSet<EntityId>,
    flagged: &BTreeSet<Pair>,
) -> Result<LowConfidenceReport> {
    let beta = cfg.beta();
    let mut rep = LowConfidenceReport { beta, ..Default::default() };
    let score = |pair: Pair, state: &AlignmentState| -> Result<(f64, f64)> {
        let conf = scorer.confidence(pair, state)?;
        Ok((conf, conf + cfg.lambda * scorer.similarity(pair)))
    };
    let mut last: Option<usize> = None;
    loop {
        let low: Vec<EntityId> = {
            let state = &*state;
            let pairs = state.pairs();
            let confs: Vec<f64> =
                pairs.par_iter().map(|&p| scorer.confidence(p, state)).collect::<Result<_>>()?;
            let first = last.is_none();
            pairs
                .iter()
                .zip(confs)
                .filter(|(p, c)| *c < beta || (first && flagged.contains(p)))
                .map(|(p, _)| p.0)
                .collect()
        };
        rep.stripped += low.len();
        for s in low {
            state.unassign(s);
            unaligned.insert(s);
        }
        rep.rounds.push(unaligned.len());
        if last.is_some_and(|l| unaligned.len() >= l) || unaligned.is_empty() {
            break;
        }
        last = Some(unaligned.len());

        let mut next = BTreeSet::new();
        for &e1 in unaligned.iter() {
            let mut scored = Vec::new();
            for t in candidates(scorer, state, e1, cfg.candidate_cap) {
                let (conf, s) = score((e1, t), state)?;
                if conf >= beta {
                    scored.push((t, s));
                }
            }
            scored.sort_by(by_score);
            for &(e2, s1) in scored.iter().take(cfg.k) {
                let incumbents: Vec<EntityId> = state.incumbents(e2).collect();
                if incumbents.is_empty() {
                    state.assign(e1, e2, Provenance::Repaired);
                    break;
                }
                let mut best_incumbent = f64::NEG_INFINITY;
                for &inc in &incumbents {
                    best_incumbent = best_incumbent.max(score((inc, e2), state)?.1);
                }
                if s1 > best_incumbent {
                    for inc in incumbents {
                        state.unassign(inc);
                        next.insert(inc);
                        rep.swaps.push(Swap {
                            target: e2,
                            winner: e1,
                            loser: inc,
                            winner_score: s1,
                            loser_score: best_incumbent,
                        });
                    }
                    state.assign(e1, e2, Provenance::Repaired);
                    break;
                }
            }
            if state.target_of(e1).is_none() {
                next.insert(e1);
            }
        }
        *unaligned = next;
    }
    rep.unresolved = unaligned.len();
    Ok(rep)
}

/// Greedily pairs the remaining sources with free targets by descending
/// similarity.
pub(super) fn fill(
    scorer: &Scorer<'_>,
    state: &mut AlignmentState,
    targets: &[EntityId],
    unaligned: &mut BTreeSet<EntityId>,
) -> FillReport {
    let free: Vec<EntityId> = targets.iter().copied().filter(|&t| state.is_free(t)).collect();
    let sources: Vec<EntityId> = unaligned.iter().copied().collect();
    let mut cands: Vec<(f64, EntityId, EntityId)> = sources
        .par_iter()
        .flat_map_iter(|&s| free.iter().map(move |&t| (scorer.similarity((s, t)), s, t)))
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut rep = FillReport::default();
    for (_, s, t) in cands {
        if unaligned.contains(&s) && state.is_free(t) {
            state.assign(s, t, Provenance::Filled);
            unaligned.remove(&s);
            rep.filled += 1;
        }
    }
    rep.unaligned = unaligned.len();
    rep
}
