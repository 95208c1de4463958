//! Confidence of a candidate pair under the current alignment.

use std::collections::{BTreeMap, BTreeSet};

use crate::adg::{build_adg, Adg, AdgConfig};
use crate::error::Result;
use crate::explain::{ExplainContext, Explanation};
use crate::pairs::{AlignmentView, Pair};

/// Builds explanations and dependency graphs, pruning neighbor nodes that
/// relation repair found to be unequal for a given central pair.
pub struct Scorer<'a> {
    pub ctx: &'a ExplainContext<'a>,
    pub cfg: AdgConfig,
    exclusions: BTreeMap<Pair, BTreeSet<Pair>>,
}

impl<'a> Scorer<'a> {
    pub fn new(ctx: &'a ExplainContext<'a>, cfg: AdgConfig) -> Self {
        Scorer { ctx, cfg, exclusions: BTreeMap::new() }
    }

    pub fn exclude_neighbors(&mut self, central: Pair, neighbors: impl IntoIterator<Item = Pair>) {
        let set = self.exclusions.entry(central).or_default();
        set.extend(neighbors);
        if set.is_empty() {
            self.exclusions.remove(&central);
        }
    }

    pub fn excluded_neighbors(&self, central: Pair) -> Option<&BTreeSet<Pair>> {
        self.exclusions.get(&central)
    }

    pub fn explain(&self, pair: Pair, view: &impl AlignmentView) -> Result<(Explanation, Adg)> {
        let mut expl = self.ctx.explain(pair, view)?;
        let mut adg = build_adg(&expl, self.ctx.kg1, self.ctx.kg2, self.ctx.store, &self.cfg)?;
        if let Some(ex) = self.exclusions.get(&pair) {
            adg.prune_neighbors(ex, &self.cfg);
            expl.matched_neighbors.retain(|n| !ex.contains(n));
            expl.path_pairs.retain(|pp| !ex.contains(&pp.neighbor()));
            expl.source_triples = expl.path_pairs.iter().flat_map(|pp| pp.source_path.triples()).collect();
            expl.target_triples = expl.path_pairs.iter().flat_map(|pp| pp.target_path.triples()).collect();
            for v in [&mut expl.source_triples, &mut expl.target_triples] {
                v.sort_unstable();
                v.dedup();
            }
        }
        Ok((expl, adg))
    }

    pub fn adg(&self, pair: Pair, view: &impl AlignmentView) -> Result<Adg> {
        Ok(self.explain(pair, view)?.1)
    }

    pub fn confidence(&self, pair: Pair, view: &impl AlignmentView) -> Result<f64> {
        Ok(self.adg(pair, view)?.confidence)
    }

    pub fn similarity(&self, pair: Pair) -> f64 {
        self.ctx.store.entity_similarity(pair.0, pair.1)
    }
}
