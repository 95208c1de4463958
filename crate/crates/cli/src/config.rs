//! Option groups shared by the subcommands and their merging with a JSON
//! config file.
//!
//! Every group is both a set of command-line flags and a set of flat keys in
//! the config file (`--triple-budget` is `triple_budget`). Unset flags fall
//! back to the file, then to the built-in default.

use std::path::{Path, PathBuf};

use clap::Args;
use exea_core::eval::Mode;
use exea_core::repair::RelationSource;
use exea_core::{AdgConfig, PathMode, RepairConfig, Stages, SynthConfig, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::failure::Failure;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct CommonOpts {
    /// JSON config file with flat keys; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core; EXEA_WORKERS overrides [default: 0]
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct DataOpts {
    /// Dataset directory holding kg1/, kg2/ and seeds.tsv [default: .]
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct EmbeddingOpts {
    /// Embedding file, text or binary [default: <data>/emb.tsv]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct PredictionOpts {
    /// Predicted alignment to explain or repair [default: <data>/pred.tsv]
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExplainOpts {
    /// Hop bound of neighborhoods and paths, 1 or 2 [default: 2]
    #[arg(long)]
    pub h: Option<usize>,
    /// How incoming steps enter path vectors: unsigned or signed [default: unsigned]
    #[arg(long)]
    pub path_mode: Option<PathMode>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct AdgOpts {
    /// Damping of moderately influential edges [default: 0.5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of weakly influential edges [default: 0.1]
    #[arg(long)]
    pub weak_weight: Option<f64>,
    /// Strong-edge threshold for consulting moderate edges [default: 0.5]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Moderate-edge threshold for consulting weak edges [default: 0.3]
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct RepairOpts {
    /// Candidate targets per source during repair [default: 5]
    #[arg(long)]
    pub k: Option<usize>,
    /// Confidence below which pairs are re-examined [default: sigmoid(theta)]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Weight of similarity in candidate scores [default: 1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Cross-graph triples consulted per pair [default: 200]
    #[arg(long)]
    pub triple_budget: Option<usize>,
    /// Candidates considered per low-confidence source [default: 20]
    #[arg(long)]
    pub candidate_cap: Option<usize>,
    /// Relation vectors used to align relations: model or names [default: model]
    #[arg(long)]
    pub relation_source: Option<RelationSource>,
    /// Resolve relation-alignment conflicts [default: true]
    #[arg(long)]
    pub relation_stage: Option<bool>,
    /// Resolve one-to-many conflicts [default: true]
    #[arg(long)]
    pub one_to_many_stage: Option<bool>,
    /// Resolve low-confidence conflicts [default: true]
    #[arg(long)]
    pub low_confidence_stage: Option<bool>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainOpts {
    /// Embedding dimension [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Training epochs [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Step size [default: 0.05]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Corrupted triples per training triple [default: 2]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Margin of the ranking loss [default: 1]
    #[arg(long)]
    pub margin: Option<f64>,
    /// Trainer random seed [default: 7]
    #[arg(long)]
    pub train_seed: Option<u64>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvalOpts {
    /// accuracy, sparsity, fidelity or ablation [default: accuracy]
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Correct predictions sampled for fidelity [default: 100]
    #[arg(long)]
    pub sample_n: Option<usize>,
    /// Seed of the fidelity sample [default: 11]
    #[arg(long)]
    pub sample_seed: Option<u64>,
    /// Seed of the random explanations [default: 13]
    #[arg(long)]
    pub random_seed: Option<u64>,
    /// Hop bound of candidate triples for sparsity and fidelity [default: 1]
    #[arg(long)]
    pub candidate_hops: Option<usize>,
    /// Also write eval.csv [default: false]
    #[arg(long)]
    pub csv: Option<bool>,
    /// Command run as `<command> <dir>` to retrain instead of the bundled trainer [default: none]
    #[arg(long)]
    pub retrain_command: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct SynthOpts {
    /// Write a named fixture instead: governor, relation-conflict or low-confidence [default: none]
    #[arg(long)]
    pub fixture: Option<String>,
    /// Entities per graph [default: 200]
    #[arg(long)]
    pub n_entities: Option<usize>,
    /// Relations per graph [default: 12]
    #[arg(long)]
    pub n_relations: Option<usize>,
    /// Triples per entity [default: 3]
    #[arg(long)]
    pub density: Option<f64>,
    /// Fraction of target triples dropped or rewired [default: 0.1]
    #[arg(long)]
    pub rename_noise: Option<f64>,
    /// Fraction of gold pairs given as seeds [default: 0.3]
    #[arg(long)]
    pub seed_fraction: Option<f64>,
    /// Gaussian noise on embeddings [default: 0.1]
    #[arg(long)]
    pub embedding_noise: Option<f64>,
    /// Fraction of test sources pulled towards a wrong target [default: 0]
    #[arg(long)]
    pub conflict_injection: Option<f64>,
    /// Generator random seed [default: 1]
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Embedding dimension [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
}

/// Keys of the config file, normalised to underscores.
pub struct FileConfig {
    map: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>, known: &[String]) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig { map: Map::new() });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("config {}: {e}", path.display())))?;
        let Value::Object(raw) = value else {
            return Err(Failure::Config(format!("config {} must be a JSON object", path.display())));
        };
        let mut map = Map::new();
        for (k, v) in raw {
            let key = k.replace('-', "_");
            if !known.contains(&key) {
                return Err(Failure::Config(format!("config {}: unknown key {k:?}", path.display())));
            }
            map.insert(key, v);
        }
        Ok(FileConfig { map })
    }

    /// Overlays the flags that were given on the file's keys.
    pub fn resolve<T: Serialize + DeserializeOwned>(&self, flags: &T) -> Result<T, Failure> {
        let Value::Object(given) = serde_json::to_value(flags).expect("options serialize") else {
            unreachable!("option groups are structs")
        };
        let mut merged = Map::new();
        for key in given.keys() {
            if let Some(v) = self.map.get(key) {
                merged.insert(key.clone(), v.clone());
            }
        }
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Config(format!("config: {e}")))
    }
}

impl CommonOpts {
    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// `EXEA_WORKERS` wins over the flag and the file.
    pub fn workers(&self) -> Result<usize, Failure> {
        match std::env::var("EXEA_WORKERS") {
            Ok(v) => v.trim().parse().map_err(|_| Failure::Config(format!("EXEA_WORKERS must be a number, got {v:?}"))),
            Err(_) => Ok(self.workers.unwrap_or(0)),
        }
    }
}

impl DataOpts {
    pub fn dir(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

impl EmbeddingOpts {
    pub fn path(&self, data: &Path) -> PathBuf {
        self.embeddings.clone().unwrap_or_else(|| data.join("emb.tsv"))
    }
}

impl PredictionOpts {
    pub fn path(&self, data: &Path) -> PathBuf {
        self.predictions.clone().unwrap_or_else(|| data.join("pred.tsv"))
    }
}

impl AdgOpts {
    pub fn build(&self) -> Result<AdgConfig, Failure> {
        let d = AdgConfig::default();
        let cfg = AdgConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            weak_weight: self.weak_weight.unwrap_or(d.weak_weight),
            theta: self.theta.unwrap_or(d.theta),
            gamma: self.gamma.unwrap_or(d.gamma),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn repair_config(e: &ExplainOpts, a: &AdgOpts, r: &RepairOpts) -> Result<RepairConfig, Failure> {
    let d = RepairConfig::default();
    let on = Stages::default();
    let cfg = RepairConfig {
        h: e.h.unwrap_or(d.h),
        k: r.k.unwrap_or(d.k),
        adg: a.build()?,
        beta: r.beta.or(d.beta),
        lambda: r.lambda.unwrap_or(d.lambda),
        triple_budget: r.triple_budget.unwrap_or(d.triple_budget),
        candidate_cap: r.candidate_cap.unwrap_or(d.candidate_cap),
        path_mode: e.path_mode.unwrap_or(d.path_mode),
        relation_source: r.relation_source.unwrap_or(d.relation_source),
        stages: Stages {
            relation: r.relation_stage.unwrap_or(on.relation),
            one_to_many: r.one_to_many_stage.unwrap_or(on.one_to_many),
            low_confidence: r.low_confidence_stage.unwrap_or(on.low_confidence),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

impl TrainOpts {
    pub fn build(&self) -> Result<TrainConfig, Failure> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            dim: self.dim.unwrap_or(d.dim),
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            negatives_per_positive: self.negatives.unwrap_or(d.negatives_per_positive),
            margin: self.margin.unwrap_or(d.margin),
            seed: self.train_seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SynthOpts {
    pub fn build(&self) -> Result<SynthConfig, Failure> {
        let d = SynthConfig::default();
        let cfg = SynthConfig {
            n_entities: self.n_entities.unwrap_or(d.n_entities),
            n_relations: self.n_relations.unwrap_or(d.n_relations),
            density: self.density.unwrap_or(d.density),
            rename_noise: self.rename_noise.unwrap_or(d.rename_noise),
            seed_fraction: self.seed_fraction.unwrap_or(d.seed_fraction),
            embedding_noise: self.embedding_noise.unwrap_or(d.embedding_noise),
            conflict_injection: self.conflict_injection.unwrap_or(d.conflict_injection),
            rng_seed: self.rng_seed.unwrap_or(d.rng_seed),
            dim: self.dim.unwrap_or(d.dim),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
