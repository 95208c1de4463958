use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use exea_core::adg::build_adg;
use exea_core::embed::{greedy_align, read_embedding_file, write_embedding_text};
use exea_core::eval::{self, EvalReport, ExternalRetrainer, FidelityConfig, Mode, Retrainer, TripleSets};
use exea_core::explain::{pair_doc, PairDoc};
use exea_core::kg::write_kg;
use exea_core::pairs::{accuracy, format_pairs, read_pairs, Pair};
use exea_core::repair::{repair as run_repair, RepairInput};
use exea_core::{fixtures, synth, EmbeddingStore, EntityId, ExplainContext, Kg, PairSet, RepairConfig, Side};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::*;
use crate::failure::Failure;
use crate::output::Run;
use crate::{known_keys, AdgCmd, EvalCmd, ExplainCmd, InferCmd, RepairCmd, SynthCmd, TrainCmd};

/// Loads the config file named by `--config` and applies the worker count.
fn setup(common: &CommonOpts) -> Result<(FileConfig, CommonOpts)> {
    let file = FileConfig::load(common.config.as_deref(), &known_keys())?;
    let common: CommonOpts = CommonOpts { config: common.config.clone(), ..file.resolve(common)? };
    let workers = common.workers()?;
    // A pool may already exist when several commands run in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok((file, common))
}

struct Dataset {
    dir: PathBuf,
    kg1: Kg,
    kg2: Kg,
    seeds: Vec<Pair>,
    /// Gold pairs of the test sources, when `test.tsv` exists.
    test: Option<Vec<Pair>>,
}

impl Dataset {
    fn load(data: &DataOpts, run: &mut Run) -> Result<Self> {
        let dir = data.dir();
        let kg = |sub: &str, side: Side, run: &mut Run| -> Result<Kg> {
            let base = dir.join(sub);
            let paths = [base.join("triples.tsv"), base.join("ent_ids.tsv"), base.join("rel_ids.tsv")];
            for p in &paths {
                run.input(p)?;
            }
            Ok(Kg::load(&paths[0], &paths[1], &paths[2], side).map_err(Failure::from)?)
        };
        let kg1 = kg("kg1", Side::Source, run)?;
        let kg2 = kg("kg2", Side::Target, run)?;
        let seeds_path = dir.join("seeds.tsv");
        run.input(&seeds_path)?;
        let seeds = read_pairs(&seeds_path, &kg1, &kg2).map_err(Failure::from)?;
        let test_path = dir.join("test.tsv");
        let test = if test_path.exists() {
            run.input(&test_path)?;
            Some(read_pairs(&test_path, &kg1, &kg2).map_err(Failure::from)?)
        } else {
            None
        };
        Ok(Dataset { dir, kg1, kg2, seeds, test })
    }

    fn embeddings(&self, path: &Path, run: &mut Run) -> Result<EmbeddingStore> {
        run.input(path)?;
        let store = read_embedding_file(path, &self.kg1, &self.kg2).map_err(Failure::from)?;
        store.covers(&self.kg1).map_err(Failure::from)?;
        store.covers(&self.kg2).map_err(Failure::from)?;
        Ok(store)
    }

    fn pairs(&self, path: &Path, run: &mut Run) -> Result<Vec<Pair>> {
        run.input(path)?;
        Ok(read_pairs(path, &self.kg1, &self.kg2).map_err(Failure::from)?)
    }

    fn seed_sources(&self) -> BTreeSet<EntityId> {
        self.seeds.iter().map(|p| p.0).collect()
    }

    /// Test sources, or every source that is not a seed.
    fn sources(&self) -> Vec<EntityId> {
        match &self.test {
            Some(t) => t.iter().map(|p| p.0).collect(),
            None => {
                let seeded = self.seed_sources();
                self.kg1.entities().filter(|e| !seeded.contains(e)).collect()
            }
        }
    }

    /// Targets that are not seeds.
    fn targets(&self) -> Vec<EntityId> {
        let seeded: BTreeSet<EntityId> = self.seeds.iter().map(|p| p.1).collect();
        self.kg2.entities().filter(|e| !seeded.contains(e)).collect()
    }

    fn format(&self, pairs: &[Pair]) -> String {
        format_pairs(pairs, &self.kg1, &self.kg2)
    }
}

fn done(run: Run) -> Result<()> {
    for p in run.commit()? {
        info!("wrote {}", p.display());
    }
    Ok(())
}

pub fn train(c: TrainCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let data: DataOpts = file.resolve(&c.data)?;
    let opts: TrainOpts = file.resolve(&c.train)?;
    let cfg = opts.build()?;
    let mut run = Run::new("train", common.out());
    run.record(&data);
    run.record(&cfg);
    let ds = Dataset::load(&data, &mut run)?;
    let (store, report) = exea_core::trainer::train(&ds.kg1, &ds.kg2, &ds.seeds, &cfg).map_err(Failure::from)?;
    run.add("emb.tsv", write_embedding_text(&store, &ds.kg1, &ds.kg2));
    run.add_json("train_report.json", &report)?;
    done(run)
}

#[derive(Serialize)]
struct InferReport {
    pairs: usize,
    accuracy: Option<f64>,
}

pub fn infer(c: InferCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let data: DataOpts = file.resolve(&c.data)?;
    let emb: EmbeddingOpts = file.resolve(&c.emb)?;
    let mut run = Run::new("infer", common.out());
    run.record(&data);
    run.record(&emb);
    let ds = Dataset::load(&data, &mut run)?;
    let store = ds.embeddings(&emb.path(&ds.dir), &mut run)?;
    let preds = greedy_align(&store, &ds.sources(), &ds.targets()).map_err(Failure::from)?;
    let acc = ds.test.as_ref().map(|t| accuracy(&preds, t));
    if let Some(a) = acc {
        info!("greedy accuracy {a:.4}");
    }
    run.add("pred.tsv", ds.format(&preds));
    run.add_json("infer_report.json", &InferReport { pairs: preds.len(), accuracy: acc })?;
    done(run)
}

/// Seeds and predictions as one alignment view.
fn view(ds: &Dataset, preds: &[Pair]) -> PairSet {
    ds.seeds.iter().chain(preds).copied().collect()
}

fn non_seed(ds: &Dataset, preds: Vec<Pair>) -> Vec<Pair> {
    let seeded = ds.seed_sources();
    preds.into_iter().filter(|p| !seeded.contains(&p.0)).collect()
}

pub fn explain(c: ExplainCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let data: DataOpts = file.resolve(&c.data)?;
    let emb: EmbeddingOpts = file.resolve(&c.emb)?;
    let pred: PredictionOpts = file.resolve(&c.pred)?;
    let ex: ExplainOpts = file.resolve(&c.explain)?;
    let d = RepairConfig::default();
    let (h, mode) = (ex.h.unwrap_or(d.h), ex.path_mode.unwrap_or(d.path_mode));
    let mut run = Run::new("explain", common.out());
    run.record(&data);
    run.record(&emb);
    run.record(&pred);
    run.set("h", h);
    run.set("path_mode", mode);
    let ds = Dataset::load(&data, &mut run)?;
    let store = ds.embeddings(&emb.path(&ds.dir), &mut run)?;
    let preds = non_seed(&ds, ds.pairs(&pred.path(&ds.dir), &mut run)?);
    let ctx = ExplainContext::new(&ds.kg1, &ds.kg2, &store, h, mode).map_err(Failure::from)?;
    let v = view(&ds, &preds);
    let docs: Vec<_> = preds
        .par_iter()
        .map(|&p| ctx.explain(p, &v).map(|e| e.to_doc(&ds.kg1, &ds.kg2, &store)))
        .collect::<exea_core::Result<_>>()
        .map_err(Failure::from)?;
    run.add_json("explanations.json", &docs)?;
    done(run)
}

pub fn adg(c: AdgCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let data: DataOpts = file.resolve(&c.data)?;
    let emb: EmbeddingOpts = file.resolve(&c.emb)?;
    let pred: PredictionOpts = file.resolve(&c.pred)?;
    let ex: ExplainOpts = file.resolve(&c.explain)?;
    let cfg = file.resolve::<AdgOpts>(&c.adg)?.build()?;
    let d = RepairConfig::default();
    let (h, mode) = (ex.h.unwrap_or(d.h), ex.path_mode.unwrap_or(d.path_mode));
    let mut run = Run::new("adg", common.out());
    run.record(&data);
    run.record(&emb);
    run.record(&pred);
    run.set("h", h);
    run.set("path_mode", mode);
    run.record(&cfg);
    let ds = Dataset::load(&data, &mut run)?;
    let store = ds.embeddings(&emb.path(&ds.dir), &mut run)?;
    let preds = non_seed(&ds, ds.pairs(&pred.path(&ds.dir), &mut run)?);
    let ctx = ExplainContext::new(&ds.kg1, &ds.kg2, &store, h, mode).map_err(Failure::from)?;
    let v = view(&ds, &preds);
    let docs: Vec<_> = preds
        .par_iter()
        .map(|&p| {
            let e = ctx.explain(p, &v)?;
            build_adg(&e, &ds.kg1, &ds.kg2, &store, &cfg).map(|g| g.to_doc(&ds.kg1, &ds.kg2))
        })
        .collect::<exea_core::Result<_>>()
        .map_err(Failure::from)?;
    run.add_json("adgs.json", &docs)?;
    done(run)
}

#[derive(Serialize)]
struct PairOut {
    #[serde(flatten)]
    pair: PairDoc,
    provenance: exea_core::repair::Provenance,
    confidence_before: Option<f64>,
    confidence_after: f64,
}

#[derive(Serialize)]
struct RuleOut {
    side: Side,
    r1: String,
    r2: String,
}

#[derive(Serialize)]
struct RepairDoc<'a> {
    accuracy_before: Option<f64>,
    accuracy_after: Option<f64>,
    stages: &'a exea_core::repair::RepairReport,
    pairs: Vec<PairOut>,
    unaligned: Vec<u64>,
    flagged: Vec<PairDoc>,
    rules: Vec<RuleOut>,
    relation_alignment: Vec<(String, String, f64)>,
}

/// Checks what the repaired alignment must satisfy whatever the input.
fn check_alignment(alignment: &[Pair], seeds: &[Pair]) -> Result<(), Failure> {
    let mut src = BTreeSet::new();
    let mut tgt = BTreeSet::new();
    for p in alignment {
        if !src.insert(p.0) || !tgt.insert(p.1) {
            return Err(Failure::Invariant(format!("repaired alignment is not one-to-one at {p:?}")));
        }
    }
    for s in seeds {
        if src.contains(&s.0) || tgt.contains(&s.1) {
            return Err(Failure::Invariant(format!("seed pair {s:?} was realigned")));
        }
    }
    Ok(())
}

pub fn repair(c: RepairCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let data: DataOpts = file.resolve(&c.data)?;
    let emb: EmbeddingOpts = file.resolve(&c.emb)?;
    let pred: PredictionOpts = file.resolve(&c.pred)?;
    let cfg = repair_config(&file.resolve(&c.explain)?, &file.resolve(&c.adg)?, &file.resolve(&c.repair)?)?;
    let mut run = Run::new("repair", common.out());
    run.record(&data);
    run.record(&emb);
    run.record(&pred);
    run.record(&cfg);
    let ds = Dataset::load(&data, &mut run)?;
    let store = ds.embeddings(&emb.path(&ds.dir), &mut run)?;
    let preds = non_seed(&ds, ds.pairs(&pred.path(&ds.dir), &mut run)?);
    let sources = if ds.test.is_some() { ds.sources() } else { Vec::new() };
    let targets: Vec<EntityId> = ds.kg2.entities().collect();
    let input = RepairInput {
        kg1: &ds.kg1,
        kg2: &ds.kg2,
        store: &store,
        seeds: &ds.seeds,
        predictions: &preds,
        sources: &sources,
        targets: &targets,
    };
    let out = run_repair(&input, &cfg).map_err(Failure::from)?;
    check_alignment(&out.alignment, &ds.seeds)?;

    let (k1, k2) = (&ds.kg1, &ds.kg2);
    let doc = RepairDoc {
        accuracy_before: ds.test.as_ref().map(|t| accuracy(&preds, t)),
        accuracy_after: ds.test.as_ref().map(|t| accuracy(&out.alignment, t)),
        stages: &out.report,
        pairs: out
            .records
            .iter()
            .map(|r| PairOut {
                pair: pair_doc(k1, k2, r.pair, Some(store.entity_similarity(r.pair.0, r.pair.1))),
                provenance: r.provenance,
                confidence_before: r.confidence_before,
                confidence_after: r.confidence_after,
            })
            .collect(),
        unaligned: out.unaligned.iter().map(|&e| k1.entity_external_id(e)).collect(),
        flagged: out.flagged.iter().map(|&p| pair_doc(k1, k2, p, None)).collect(),
        rules: out
            .rules
            .iter()
            .map(|r| {
                let kg = if r.side == Side::Source { k1 } else { k2 };
                RuleOut { side: r.side, r1: kg.relation_label(r.r1).into(), r2: kg.relation_label(r.r2).into() }
            })
            .collect(),
        relation_alignment: out
            .relation_alignment
            .pairs()
            .iter()
            .map(|&(a, b, s)| (k1.relation_label(a).to_string(), k2.relation_label(b).to_string(), s))
            .collect(),
    };
    if let (Some(a), Some(b)) = (doc.accuracy_before, doc.accuracy_after) {
        info!("accuracy {a:.4} -> {b:.4}");
    }
    run.add("a_star.tsv", ds.format(&out.alignment));
    run.add_json("report.json", &doc)?;
    done(run)
}

pub fn eval(c: EvalCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let data: DataOpts = file.resolve(&c.data)?;
    let emb: EmbeddingOpts = file.resolve(&c.emb)?;
    let pred: PredictionOpts = file.resolve(&c.pred)?;
    let ev: EvalOpts = file.resolve(&c.eval)?;
    let cfg = repair_config(&file.resolve(&c.explain)?, &file.resolve(&c.adg)?, &file.resolve(&c.repair)?)?;
    let trainer = file.resolve::<TrainOpts>(&c.train)?.build()?;
    let mode = ev.mode.unwrap_or(Mode::Accuracy);
    let fd = FidelityConfig::default();
    let fcfg = FidelityConfig {
        sample_n: ev.sample_n.unwrap_or(fd.sample_n),
        sample_seed: ev.sample_seed.unwrap_or(fd.sample_seed),
        random_seed: ev.random_seed.unwrap_or(fd.random_seed),
        h: ev.candidate_hops.unwrap_or(fd.h),
        trainer,
    };
    if !(1..=2).contains(&fcfg.h) {
        return Err(Failure::Config(format!("candidate_hops must be 1 or 2, got {}", fcfg.h)).into());
    }

    let mut run = Run::new("eval", common.out());
    run.record(&data);
    run.set("mode", mode);
    let ds = Dataset::load(&data, &mut run)?;
    let test = ds
        .test
        .clone()
        .ok_or_else(|| Failure::Data(format!("{} is required for evaluation", ds.dir.join("test.tsv").display())))?;

    let mut snapshot = serde_json::Map::new();
    snapshot.insert("mode".into(), serde_json::to_value(mode)?);
    let mut report;
    match mode {
        Mode::Fidelity => {
            run.record(&fcfg);
            run.set("retrain_command", &ev.retrain_command);
            let work = tempfile::tempdir()?;
            let external = ev.retrain_command.as_ref().map(|cmd| {
                let mut words = cmd.split_whitespace().map(String::from);
                ExternalRetrainer {
                    program: words.next().unwrap_or_default(),
                    args: words.collect(),
                    work_dir: work.path().to_path_buf(),
                }
            });
            let x = eval::fidelity_experiment(
                &ds.kg1,
                &ds.kg2,
                &ds.seeds,
                &test,
                &ds.targets(),
                &fcfg,
                external.as_ref().map(|e| e as &dyn Retrainer),
            )
            .map_err(Failure::from)?;
            snapshot.insert("fidelity".into(), serde_json::to_value(&fcfg)?);
            report = EvalReport::new(mode, serde_json::Value::Object(snapshot));
            report.accuracy = x.base_accuracy;
            report.fidelity = Some(x.explained.fidelity);
            report.mean_sparsity = Some(x.explained.mean_sparsity);
            report.random_fidelity = Some(x.random.fidelity);
            report.random_sparsity = Some(x.random.mean_sparsity);
            report.sample_size = x.explained.sample_size;
            report.timings = x.timings;
        }
        _ => {
            run.record(&emb);
            run.record(&pred);
            run.record(&cfg);
            let store = ds.embeddings(&emb.path(&ds.dir), &mut run)?;
            let preds = non_seed(&ds, ds.pairs(&pred.path(&ds.dir), &mut run)?);
            snapshot.insert("repair".into(), serde_json::to_value(&cfg)?);
            report = EvalReport::new(mode, serde_json::Value::Object(snapshot));
            report.accuracy = accuracy(&preds, &test);
            report.sample_size = test.len();
            let sources = ds.sources();
            let targets: Vec<EntityId> = ds.kg2.entities().collect();
            let input = RepairInput {
                kg1: &ds.kg1,
                kg2: &ds.kg2,
                store: &store,
                seeds: &ds.seeds,
                predictions: &preds,
                sources: &sources,
                targets: &targets,
            };
            match mode {
                Mode::Accuracy => {
                    report.per_stage_accuracy = eval::stage_accuracy(&input, &cfg, &test).map_err(Failure::from)?;
                }
                Mode::Ablation => {
                    report.ablation =
                        eval::ablation(&input, &cfg, &eval::standard_variants(), &test).map_err(Failure::from)?;
                }
                Mode::Sparsity => {
                    run.set("candidate_hops", fcfg.h);
                    let ctx = ExplainContext::new(&ds.kg1, &ds.kg2, &store, fcfg.h, cfg.path_mode)
                        .map_err(Failure::from)?;
                    let v = view(&ds, &preds);
                    let values: Vec<Option<f64>> = preds
                        .par_iter()
                        .map(|&p| {
                            let e = ctx.explain(p, &v)?;
                            match TripleSets::of(&ctx, &e)?.sparsity() {
                                Ok(s) => Ok(Some(s.value)),
                                Err(exea_core::Error::EmptyCandidates) => Ok(None),
                                Err(other) => Err(other),
                            }
                        })
                        .collect::<exea_core::Result<_>>()
                        .map_err(Failure::from)?;
                    let known: Vec<f64> = values.into_iter().flatten().collect();
                    report.sample_size = known.len();
                    if !known.is_empty() {
                        report.mean_sparsity = Some(known.iter().sum::<f64>() / known.len() as f64);
                    }
                }
                Mode::Fidelity => unreachable!(),
            }
        }
    }
    for (stage, t) in &report.timings {
        info!("{stage}: {t:?}");
    }
    run.add_json("eval_report.json", &report)?;
    if ev.csv.unwrap_or(false) {
        run.add("eval.csv", report.to_csv());
    }
    done(run).context("writing evaluation outputs")
}

fn kg_files(run: &mut Run, sub: &str, kg: &Kg) {
    let (mut t, mut e, mut r) = (String::new(), String::new(), String::new());
    write_kg(kg, &mut t, &mut e, &mut r);
    run.add(format!("{sub}/triples.tsv"), t);
    run.add(format!("{sub}/ent_ids.tsv"), e);
    run.add(format!("{sub}/rel_ids.tsv"), r);
}

struct Written<'a> {
    kg1: &'a Kg,
    kg2: &'a Kg,
    seeds: &'a [Pair],
    test: &'a [Pair],
    gold: &'a [Pair],
    predictions: &'a [Pair],
    store: &'a EmbeddingStore,
    ideal: Option<&'a EmbeddingStore>,
}

fn dataset_files(run: &mut Run, w: Written<'_>) {
    kg_files(run, "kg1", w.kg1);
    kg_files(run, "kg2", w.kg2);
    for (name, pairs) in [("seeds.tsv", w.seeds), ("test.tsv", w.test), ("gold.tsv", w.gold), ("pred.tsv", w.predictions)] {
        run.add(name, format_pairs(pairs, w.kg1, w.kg2));
    }
    run.add("emb.tsv", write_embedding_text(w.store, w.kg1, w.kg2));
    if let Some(ideal) = w.ideal {
        run.add("emb_ideal.tsv", write_embedding_text(ideal, w.kg1, w.kg2));
    }
}

pub fn synth(c: SynthCmd) -> Result<()> {
    let (file, common) = setup(&c.common)?;
    let opts: SynthOpts = file.resolve(&c.synth)?;
    let mut run = Run::new("synth", common.out());
    if let Some(name) = &opts.fixture {
        let f = fixtures::by_name(name).ok_or_else(|| {
            Failure::Config(format!("unknown fixture {name:?}; known: {}", fixtures::FIXTURE_NAMES.join(", ")))
        })?;
        run.set("fixture", name);
        let test = f.test_gold();
        dataset_files(
            &mut run,
            Written {
                kg1: &f.kg1,
                kg2: &f.kg2,
                seeds: &f.seeds,
                test: &test,
                gold: &f.gold,
                predictions: &f.predictions,
                store: &f.store,
                ideal: None,
            },
        );
    } else {
        let cfg = opts.build()?;
        run.record(&cfg);
        let d = synth::generate(&cfg).map_err(Failure::from)?;
        info!("raw greedy accuracy {:.4}", accuracy(&d.predictions, &d.test));
        dataset_files(
            &mut run,
            Written {
                kg1: &d.kg1,
                kg2: &d.kg2,
                seeds: &d.seeds,
                test: &d.test,
                gold: &d.gold,
                predictions: &d.predictions,
                store: &d.store,
                ideal: Some(&d.ideal),
            },
        );
    }
    done(run)
}
