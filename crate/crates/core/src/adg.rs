//! Alignment dependency graphs: typed, weighted edges from matched neighbor
//! pairs to a central pair, aggregated into a confidence score.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingStore;
use crate::error::{Error, Result};
use crate::explain::{pair_doc, path_doc, Explanation, MatchedPathPair, PairDoc, StepDoc};
use crate::kg::{Direction, Kg, RelationPath};
use crate::pairs::Pair;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdgConfig {
    /// Damping factor of moderately influential edges.
    pub alpha: f64,
    /// Fixed weight of weakly influential edges.
    pub weak_weight: f64,
    /// Strong-aggregate threshold below which moderate edges are consulted.
    pub theta: f64,
    /// Moderate-aggregate threshold below which weak edges are consulted.
    pub gamma: f64,
}

impl Default for AdgConfig {
    fn default() -> Self {
        AdgConfig { alpha: 0.5, weak_weight: 0.1, theta: 0.5, gamma: 0.3 }
    }
}

impl AdgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.weak_weight >= 0.0 && self.weak_weight <= self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "weak_weight must be in [0, alpha], got {}",
                self.weak_weight
            )));
        }
        if !self.theta.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig("theta and gamma must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    /// Both paths have length one.
    Strong,
    /// Exactly one path has length one.
    Moderate,
    /// Both paths are longer than one.
    Weak,
}

impl EdgeClass {
    pub fn of_lengths(a: usize, b: usize) -> EdgeClass {
        match (a == 1, b == 1) {
            (true, true) => EdgeClass::Strong,
            (true, false) | (false, true) => EdgeClass::Moderate,
            (false, false) => EdgeClass::Weak,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdgNode {
    pub pair: Pair,
    /// Entity cosine similarity clamped to `[0, 1]`.
    pub influence: f64,
    pub is_central: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdgEdge {
    /// Index into [`Adg::neighbors`].
    pub neighbor: usize,
    pub path_pair: MatchedPathPair,
    pub class: EdgeClass,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adg {
    pub central: AdgNode,
    pub neighbors: Vec<AdgNode>,
    pub edges: Vec<AdgEdge>,
    pub c_s: f64,
    pub c_m: f64,
    pub c_w: f64,
    pub confidence: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gated aggregation: moderate edges only count while the strong aggregate
/// is below `theta`, weak edges only while the moderate one is below `gamma`.
pub fn gated_confidence(c_s: f64, c_m: f64, c_w: f64, cfg: &AdgConfig) -> f64 {
    let weak = if c_m < cfg.gamma { c_w } else { 0.0 };
    let rest = if c_s < cfg.theta { c_m + weak } else { 0.0 };
    sigmoid(c_s + rest)
}

/// Weight of a single path: inverse functionality for steps leaving their
/// anchor, functionality for steps entering it, multiplied along the path.
pub fn path_weight(kg: &Kg, path: &RelationPath) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Invariant("weight of an empty path".into()));
    }
    path.steps.iter().try_fold(1.0, |acc, step| {
        let w = match step.direction {
            Direction::Outgoing => kg.inverse_functionality(step.relation)?,
            Direction::Incoming => kg.functionality(step.relation)?,
        };
        Ok(acc * w)
    })
}

/// Class and weight of the edge formed by two matched paths.
pub fn edge_weight(
    kg1: &Kg,
    kg2: &Kg,
    source_path: &RelationPath,
    target_path: &RelationPath,
    cfg: &AdgConfig,
) -> Result<(EdgeClass, f64)> {
    let class = EdgeClass::of_lengths(source_path.len(), target_path.len());
    let weight = match class {
        EdgeClass::Strong | EdgeClass::Moderate => {
            let w = path_weight(kg1, source_path)?.min(path_weight(kg2, target_path)?);
            if class == EdgeClass::Moderate {
                cfg.alpha * w
            } else {
                w
            }
        }
        EdgeClass::Weak => cfg.weak_weight,
    };
    Ok((class, weight))
}

impl Adg {
    /// Recomputes the per-class aggregates and the confidence from the
    /// current nodes and edges.
    pub fn recompute(&mut self, cfg: &AdgConfig) {
        let (mut c_s, mut c_m, mut c_w) = (0.0, 0.0, 0.0);
        for e in &self.edges {
            let contribution = e.weight * self.neighbors[e.neighbor].influence;
            match e.class {
                EdgeClass::Strong => c_s += contribution,
                EdgeClass::Moderate => c_m += contribution,
                EdgeClass::Weak => c_w += contribution,
            }
        }
        self.c_s = c_s;
        self.c_m = c_m;
        self.c_w = c_w;
        self.confidence = gated_confidence(c_s, c_m, c_w, cfg);
    }

    pub fn has_strong_edges(&self) -> bool {
        self.edges.iter().any(|e| e.class == EdgeClass::Strong)
    }

    /// Removes the given neighbor nodes and their edges, then recomputes.
    pub fn prune_neighbors(&mut self, remove: &BTreeSet<Pair>, cfg: &AdgConfig) {
        if remove.is_empty() {
            return;
        }
        let mut remap = vec![None; self.neighbors.len()];
        let mut kept = Vec::new();
        for (i, node) in self.neighbors.drain(..).enumerate() {
            if !remove.contains(&node.pair) {
                remap[i] = Some(kept.len());
                kept.push(node);
            }
        }
        self.neighbors = kept;
        self.edges.retain_mut(|e| match remap[e.neighbor] {
            Some(j) => {
                e.neighbor = j;
                true
            }
            None => false,
        });
        self.recompute(cfg);
    }
}

fn influence(store: &EmbeddingStore, pair: Pair) -> f64 {
    store.entity_similarity(pair.0, pair.1).clamp(0.0, 1.0)
}

/// Builds the dependency graph of an explanation.
pub fn build_adg(expl: &Explanation, kg1: &Kg, kg2: &Kg, store: &EmbeddingStore, cfg: &AdgConfig) -> Result<Adg> {
    let central = AdgNode { pair: expl.pair, influence: influence(store, expl.pair), is_central: true };
    let neighbors: Vec<AdgNode> = expl
        .matched_neighbors
        .iter()
        .map(|&pair| AdgNode { pair, influence: influence(store, pair), is_central: false })
        .collect();
    let mut edges = Vec::with_capacity(expl.path_pairs.len());
    for pp in &expl.path_pairs {
        let neighbor = neighbors
            .iter()
            .position(|n| n.pair == pp.neighbor())
            .ok_or_else(|| Error::Invariant("path pair ends outside the matched neighbors".into()))?;
        let (class, weight) = edge_weight(kg1, kg2, &pp.source_path, &pp.target_path, cfg)?;
        edges.push(AdgEdge { neighbor, path_pair: pp.clone(), class, weight });
    }
    let mut adg = Adg { central, neighbors, edges, c_s: 0.0, c_m: 0.0, c_w: 0.0, confidence: 0.0 };
    adg.recompute(cfg);
    Ok(adg)
}

#[derive(Clone, Debug, Serialize)]
pub struct AdgNodeDoc {
    #[serde(flatten)]
    pub pair: PairDoc,
    pub influence: f64,
    pub central: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdgEdgeDoc {
    pub neighbor: usize,
    pub class: EdgeClass,
    pub weight: f64,
    pub path_similarity: f64,
    pub source_path: Vec<StepDoc>,
    pub target_path: Vec<StepDoc>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregatesDoc {
    pub c_s: f64,
    pub c_m: f64,
    pub c_w: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdgDoc {
    pub nodes: Vec<AdgNodeDoc>,
    pub edges: Vec<AdgEdgeDoc>,
    pub aggregates: AggregatesDoc,
    pub confidence: f64,
}

impl Adg {
    /// JSON-facing form; node 0 is the central node and edge `neighbor`
    /// indices are offset by one accordingly.
    pub fn to_doc(&self, kg1: &Kg, kg2: &Kg) -> AdgDoc {
        let node = |n: &AdgNode| AdgNodeDoc {
            pair: pair_doc(kg1, kg2, n.pair, None),
            influence: n.influence,
            central: n.is_central,
        };
        AdgDoc {
            nodes: std::iter::once(&self.central).chain(&self.neighbors).map(node).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| AdgEdgeDoc {
                    neighbor: e.neighbor + 1,
                    class: e.class,
                    weight: e.weight,
                    path_similarity: e.path_pair.similarity,
                    source_path: path_doc(kg1, &e.path_pair.source_path),
                    target_path: path_doc(kg2, &e.path_pair.target_path),
                })
                .collect(),
            aggregates: AggregatesDoc { c_s: self.c_s, c_m: self.c_m, c_w: self.c_w },
            confidence: self.confidence,
        }
    }
}
