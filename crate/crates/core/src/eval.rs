//! Metrics and the experiment harness: accuracy, sparsity, retrain-based
//! fidelity and stage ablation.
//!
//! Fidelity samples correct predictions, removes every candidate triple of
//! each sample that lies outside its explanation, retrains once on the
//! processed graphs and counts how many samples are still predicted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{greedy_align, read_embedding_file, EmbeddingStore};
use crate::error::{Error, Result};
use crate::explain::{ExplainContext, Explanation};
use crate::kg::{EntityId, Kg, Side, Triple};
use crate::pairs::{format_pairs, AlignmentView, Pair};
use crate::repair::{repair, RepairConfig, RepairInput, Stage, Stages};
use crate::synth::write_kg_dir;
use crate::trainer::{train, TrainConfig};

pub use crate::pairs::accuracy;

/// A triple tagged with the graph it belongs to.
pub type SidedTriple = (Side, Triple);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sparsity {
    pub value: f64,
    /// Set when the explanation is empty.
    pub no_match: bool,
}

/// `1 - |explanation| / |candidates|`.
pub fn sparsity<T: Ord>(candidates: &BTreeSet<T>, explanation: &BTreeSet<T>) -> Result<Sparsity> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if !explanation.is_subset(candidates) {
        return Err(Error::NotSubset);
    }
    Ok(Sparsity {
        value: 1.0 - explanation.len() as f64 / candidates.len() as f64,
        no_match: explanation.is_empty(),
    })
}

/// Candidate and explanation triples of one explained pair, both sides.
#[derive(Clone, Debug, Default)]
pub struct TripleSets {
    pub candidates: BTreeSet<SidedTriple>,
    pub explanation: BTreeSet<SidedTriple>,
}

impl TripleSets {
    pub fn of(ctx: &ExplainContext<'_>, expl: &Explanation) -> Result<Self> {
        let (c1, c2) = ctx.candidate_triples(expl.pair)?;
        Ok(TripleSets {
            candidates: tag(c1, c2),
            explanation: tag(expl.source_triples.iter().copied(), expl.target_triples.iter().copied()),
        })
    }

    pub fn sparsity(&self) -> Result<Sparsity> {
        sparsity(&self.candidates, &self.explanation)
    }

    /// Same candidates, with a uniformly drawn explanation of the same size.
    pub fn random_like(&self, rng: &mut ChaCha8Rng) -> Self {
        let all: Vec<SidedTriple> = self.candidates.iter().copied().collect();
        let explanation = all.choose_multiple(rng, self.explanation.len()).copied().collect();
        TripleSets { candidates: self.candidates.clone(), explanation }
    }
}

fn tag(src: impl IntoIterator<Item = Triple>, tgt: impl IntoIterator<Item = Triple>) -> BTreeSet<SidedTriple> {
    src.into_iter()
        .map(|t| (Side::Source, t))
        .chain(tgt.into_iter().map(|t| (Side::Target, t)))
        .collect()
}

/// Up to `n` correct predictions, drawn by `seed`. Depends only on the seed
/// and the set of correct predictions.
pub fn sample_correct(predictions: &[Pair], gold: &[Pair], n: usize, seed: u64) -> Vec<Pair> {
    let gold: BTreeSet<Pair> = gold.iter().copied().collect();
    let mut correct: Vec<Pair> = predictions.iter().copied().filter(|p| gold.contains(p)).collect();
    correct.sort_unstable();
    correct.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    correct.shuffle(&mut rng);
    correct.truncate(n);
    correct.sort_unstable();
    correct
}

/// Removes `candidates - explanation` of every sample. A triple inside any
/// sample's explanation is kept even if another sample would remove it.
pub fn process_dataset(kg1: &Kg, kg2: &Kg, samples: &[TripleSets]) -> (Kg, Kg) {
    let mut keep = BTreeSet::new();
    let mut drop = BTreeSet::new();
    for s in samples {
        keep.extend(s.explanation.iter().copied());
        drop.extend(s.candidates.difference(&s.explanation).copied());
    }
    let removed: BTreeSet<SidedTriple> = drop.difference(&keep).copied().collect();
    (
        kg1.retain_triples(|t| !removed.contains(&(Side::Source, *t))),
        kg2.retain_triples(|t| !removed.contains(&(Side::Target, *t))),
    )
}

/// Produces embeddings for a (processed) dataset.
pub trait Retrainer: Sync {
    fn retrain(&self, kg1: &Kg, kg2: &Kg, seeds: &[Pair]) -> Result<EmbeddingStore>;
}

impl Retrainer for TrainConfig {
    fn retrain(&self, kg1: &Kg, kg2: &Kg, seeds: &[Pair]) -> Result<EmbeddingStore> {
        train(kg1, kg2, seeds, self).map(|(store, _)| store)
    }
}

/// Runs `program args... <dir>` after writing `kg1/`, `kg2/` and `seeds.tsv`
/// into `dir`; the command must leave its embeddings in `dir/emb.tsv`.
#[derive(Clone, Debug)]
pub struct ExternalRetrainer {
    pub program: String,
    pub args: Vec<String>,
    pub work_dir: PathBuf,
}

impl Retrainer for ExternalRetrainer {
    fn retrain(&self, kg1: &Kg, kg2: &Kg, seeds: &[Pair]) -> Result<EmbeddingStore> {
        let dir = &self.work_dir;
        write_kg_dir(kg1, &dir.join("kg1"))?;
        write_kg_dir(kg2, &dir.join("kg2"))?;
        let seeds_path = dir.join("seeds.tsv");
        std::fs::write(&seeds_path, format_pairs(seeds, kg1, kg2)).map_err(|e| Error::io(&seeds_path, e))?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(dir)
            .status()
            .map_err(|e| Error::TrainerFailure(format!("cannot run {}: {e}", self.program)))?;
        if !status.success() {
            return Err(Error::TrainerFailure(format!("{} exited with {status}", self.program)));
        }
        read_embedding_file(dir.join("emb.tsv"), kg1, kg2)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityResult {
    pub fidelity: f64,
    pub mean_sparsity: f64,
    pub sample_size: usize,
    pub removed_triples: usize,
    /// Sampled pairs whose explanation is empty.
    pub no_match: usize,
}

/// Retrains once on the processed dataset and returns the fraction of
/// sampled pairs that greedy search over `targets` still predicts.
pub fn fidelity(
    kg1: &Kg,
    kg2: &Kg,
    seeds: &[Pair],
    samples: &[(Pair, TripleSets)],
    targets: &[EntityId],
    retrainer: &dyn Retrainer,
) -> Result<FidelityResult> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("fidelity needs at least one sampled pair".into()));
    }
    let sets: Vec<TripleSets> = samples.iter().map(|(_, s)| s.clone()).collect();
    let (p1, p2) = process_dataset(kg1, kg2, &sets);
    let removed = kg1.triples().len() + kg2.triples().len() - p1.triples().len() - p2.triples().len();
    let store = retrainer.retrain(&p1, &p2, seeds)?;
    let sources: Vec<EntityId> = samples.iter().map(|(p, _)| p.0).collect();
    let predicted = greedy_align(&store, &sources, targets)?;
    let wanted: Vec<Pair> = samples.iter().map(|(p, _)| *p).collect();
    let mut sp = 0.0;
    let mut no_match = 0;
    for s in &sets {
        let v = s.sparsity()?;
        sp += v.value;
        no_match += usize::from(v.no_match);
    }
    Ok(FidelityResult {
        fidelity: accuracy(&predicted, &wanted),
        mean_sparsity: sp / sets.len() as f64,
        sample_size: samples.len(),
        removed_triples: removed,
        no_match,
    })
}

/// Explains every sampled pair against `view` and collects its triple sets.
pub fn explain_samples(
    ctx: &ExplainContext<'_>,
    sampled: &[Pair],
    view: &(impl AlignmentView + Sync),
) -> Result<Vec<(Pair, TripleSets)>> {
    sampled
        .par_iter()
        .map(|&p| {
            let e = ctx.explain(p, view)?;
            Ok((p, TripleSets::of(ctx, &e)?))
        })
        .collect()
}

/// Replaces each explanation by a random subset of its candidates with the
/// same number of triples.
pub fn random_explanations(samples: &[(Pair, TripleSets)], seed: u64) -> Vec<(Pair, TripleSets)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples.iter().map(|(p, s)| (*p, s.random_like(&mut rng))).collect()
}

/// Replaces each explanation by the empty set.
pub fn empty_explanations(samples: &[(Pair, TripleSets)]) -> Vec<(Pair, TripleSets)> {
    samples
        .iter()
        .map(|(p, s)| (*p, TripleSets { candidates: s.candidates.clone(), explanation: BTreeSet::new() }))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Accuracy,
    Sparsity,
    Fidelity,
    Ablation,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Mode::Accuracy),
            "sparsity" => Ok(Mode::Sparsity),
            "fidelity" => Ok(Mode::Fidelity),
            "ablation" => Ok(Mode::Ablation),
            other => Err(Error::InvalidConfig(format!("unknown eval mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub stages: Stages,
    pub accuracy: f64,
    /// Accuracy minus that of the full pipeline.
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub accuracy: f64,
    pub mean_sparsity: Option<f64>,
    pub fidelity: Option<f64>,
    /// Fidelity of random explanations with matched sparsity.
    pub random_fidelity: Option<f64>,
    pub random_sparsity: Option<f64>,
    pub per_stage_accuracy: BTreeMap<String, f64>,
    pub ablation: Vec<AblationRow>,
    pub sample_size: usize,
    pub config: serde_json::Value,
    /// Wall-clock time per stage. Kept out of the JSON so that reports
    /// replay byte for byte.
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
}

impl EvalReport {
    pub fn new(mode: Mode, config: serde_json::Value) -> Self {
        EvalReport {
            mode,
            accuracy: 0.0,
            mean_sparsity: None,
            fidelity: None,
            random_fidelity: None,
            random_sparsity: None,
            per_stage_accuracy: BTreeMap::new(),
            ablation: Vec::new(),
            sample_size: 0,
            config,
            timings: Vec::new(),
        }
    }

    /// A flat table: one `method,metric,value` row per number.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,value\n");
        let mut row = |m: &str, k: &str, v: f64| out.push_str(&format!("{m},{k},{v:.4}\n"));
        row("base", "accuracy", self.accuracy);
        if let Some(f) = self.fidelity {
            row("explained", "fidelity", f);
        }
        if let Some(s) = self.mean_sparsity {
            row("explained", "sparsity", s);
        }
        if let Some(f) = self.random_fidelity {
            row("random", "fidelity", f);
        }
        if let Some(s) = self.random_sparsity {
            row("random", "sparsity", s);
        }
        for (stage, acc) in &self.per_stage_accuracy {
            row(stage, "accuracy", *acc);
        }
        for a in &self.ablation {
            row(&a.variant, "accuracy", a.accuracy);
            row(&a.variant, "delta", a.delta);
        }
        out
    }
}

pub fn stage_name(s: Stage) -> &'static str {
    match s {
        Stage::Raw => "raw",
        Stage::Relation => "relation",
        Stage::OneToMany => "one_to_many",
        Stage::LowConfidence => "low_confidence",
        Stage::Fill => "fill",
    }
}

/// Accuracy after every stage of one repair run.
pub fn stage_accuracy(input: &RepairInput<'_>, cfg: &RepairConfig, gold: &[Pair]) -> Result<BTreeMap<String, f64>> {
    let out = repair(input, cfg)?;
    let mut acc = BTreeMap::new();
    for (stage, pairs) in &out.stages {
        acc.insert(stage_name(*stage).to_string(), accuracy(pairs, gold));
    }
    Ok(acc)
}

/// The full pipeline, each stage switched off alone, and all stages off.
pub fn standard_variants() -> Vec<(String, Stages)> {
    let on = Stages::default();
    vec![
        ("full".into(), on),
        ("w/o relation".into(), Stages { relation: false, ..on }),
        ("w/o one_to_many".into(), Stages { one_to_many: false, ..on }),
        ("w/o low_confidence".into(), Stages { low_confidence: false, ..on }),
        ("none".into(), Stages { relation: false, one_to_many: false, low_confidence: false }),
    ]
}

/// One repair run per variant. Deltas are relative to the first variant.
pub fn ablation(
    input: &RepairInput<'_>,
    base: &RepairConfig,
    variants: &[(String, Stages)],
    gold: &[Pair],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(variants.len());
    for (name, stages) in variants {
        let cfg = RepairConfig { stages: *stages, ..base.clone() };
        let out = repair(input, &cfg)?;
        rows.push(AblationRow { variant: name.clone(), stages: *stages, accuracy: accuracy(&out.alignment, gold), delta: 0.0 });
    }
    if let Some(first) = rows.first().map(|r| r.accuracy) {
        for r in &mut rows {
            r.delta = r.accuracy - first;
        }
    }
    Ok(rows)
}

/// Settings of a full fidelity experiment.
#[derive(Clone, Debug, Serialize)]
pub struct FidelityConfig {
    pub sample_n: usize,
    pub sample_seed: u64,
    pub random_seed: u64,
    pub h: usize,
    pub trainer: TrainConfig,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        FidelityConfig { sample_n: 100, sample_seed: 11, random_seed: 13, h: 1, trainer: TrainConfig::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FidelityExperiment {
    pub base_accuracy: f64,
    pub explained: FidelityResult,
    pub random: FidelityResult,
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
}

/// Trains a base model, predicts greedily over `targets`, explains a sample
/// of correct predictions, then measures fidelity of the explanations and of
/// random explanations of equal size. `retrainer` defaults to the bundled
/// trainer with the base model's settings.
pub fn fidelity_experiment(
    kg1: &Kg,
    kg2: &Kg,
    seeds: &[Pair],
    test: &[Pair],
    targets: &[EntityId],
    cfg: &FidelityConfig,
    retrainer: Option<&dyn Retrainer>,
) -> Result<FidelityExperiment> {
    let mut timings = Vec::new();
    let t = Instant::now();
    let (store, _) = train(kg1, kg2, seeds, &cfg.trainer)?;
    timings.push(("train".to_string(), t.elapsed()));

    let sources: Vec<EntityId> = test.iter().map(|p| p.0).collect();
    let predictions = greedy_align(&store, &sources, targets)?;
    let base_accuracy = accuracy(&predictions, test);
    let sampled = sample_correct(&predictions, test, cfg.sample_n, cfg.sample_seed);
    if sampled.is_empty() {
        return Err(Error::TrainerFailure("the base model predicts no test pair correctly".into()));
    }

    let t = Instant::now();
    let ctx = ExplainContext::new(kg1, kg2, &store, cfg.h, Default::default())?;
    let view: crate::pairs::PairSet = seeds.iter().chain(&predictions).copied().collect();
    let samples = explain_samples(&ctx, &sampled, &view)?;
    timings.push(("explain".to_string(), t.elapsed()));

    let retrainer = retrainer.unwrap_or(&cfg.trainer);
    let t = Instant::now();
    let explained = fidelity(kg1, kg2, seeds, &samples, targets, retrainer)?;
    timings.push(("retrain explained".to_string(), t.elapsed()));
    let t = Instant::now();
    let random = fidelity(kg1, kg2, seeds, &random_explanations(&samples, cfg.random_seed), targets, retrainer)?;
    timings.push(("retrain random".to_string(), t.elapsed()));
    Ok(FidelityExperiment { base_accuracy, explained, random, timings })
}
