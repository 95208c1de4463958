use exea_core::pairs::accuracy;
use exea_core::repair::{repair, RepairInput};
use exea_core::synth::generate;
use exea_core::{RepairConfig, Stages, SynthConfig, SynthPair};

fn repaired(d: &SynthPair, stages: Stages) -> f64 {
    let targets = d.test_targets();
    let sources = d.test_sources();
    let input = RepairInput {
        kg1: &d.kg1,
        kg2: &d.kg2,
        store: &d.store,
        seeds: &d.seeds,
        predictions: &d.predictions,
        sources: &sources,
        targets: &targets,
    };
    let out = repair(&input, &RepairConfig { stages, ..Default::default() }).unwrap();
    accuracy(&out.alignment, &d.test)
}

#[test]
fn injected_conflicts_are_repaired() {
    let d = generate(&SynthConfig { rng_seed: 13, conflict_injection: 0.2, ..Default::default() }).unwrap();
    let raw = accuracy(&d.predictions, &d.test);
    let full = repaired(&d, Stages::default());
    let no_o2m = repaired(&d, Stages { one_to_many: false, ..Default::default() });
    eprintln!("raw {raw:.3} full {full:.3} without one-to-many {no_o2m:.3}");
    assert!(full >= raw);
    assert!(no_o2m < full);
}

#[test]
fn clean_embeddings_are_not_made_worse() {
    for seed in [1, 2, 3] {
        let d = generate(&SynthConfig { rng_seed: seed, ..Default::default() }).unwrap();
        let raw = accuracy(&d.predictions, &d.test);
        assert!(repaired(&d, Stages::default()) >= raw, "seed {seed}");
    }
}

#[test]
fn generator_output_is_frozen() {
    let d = generate(&SynthConfig::default()).unwrap();
    let counts = (
        d.kg1.triples().len(),
        d.kg2.triples().len(),
        d.kg1.num_relations(),
        d.seeds.len(),
        d.test.len(),
        d.injected.len(),
    );
    assert_eq!(counts, (600, 579, 12, 60, 140, 0));
}

#[test]
fn every_entity_is_in_gold_once() {
    let d = generate(&SynthConfig { rng_seed: 5, conflict_injection: 0.3, ..Default::default() }).unwrap();
    let mut s: Vec<_> = d.gold.iter().map(|p| p.0).collect();
    let mut t: Vec<_> = d.gold.iter().map(|p| p.1).collect();
    s.dedup();
    t.sort();
    t.dedup();
    assert_eq!(s.len(), d.kg1.num_entities());
    assert_eq!(t.len(), d.kg2.num_entities());
    assert_eq!(d.seeds.len() + d.test.len(), d.gold.len());
    assert_eq!(d.predictions.len(), d.test.len());
}
