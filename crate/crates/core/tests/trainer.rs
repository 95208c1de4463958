use exea_core::embed::greedy_align;
use exea_core::pairs::accuracy;
use exea_core::synth::generate;
use exea_core::trainer::train;
use exea_core::{SynthConfig, TrainConfig};

fn isomorphic() -> exea_core::SynthPair {
    let cfg = SynthConfig { n_entities: 120, rename_noise: 0.0, seed_fraction: 0.3, rng_seed: 3, ..Default::default() };
    generate(&cfg).unwrap()
}

#[test]
fn isomorphic_graphs_align_on_held_out_pairs() {
    let d = isomorphic();
    let (store, report) = train(&d.kg1, &d.kg2, &d.seeds, &TrainConfig::default()).unwrap();
    assert!(report.warnings.is_empty());
    let first = report.epoch_losses[0];
    let last = *report.epoch_losses.last().unwrap();
    assert!(last < first, "loss went from {first} to {last}");
    let predicted = greedy_align(&store, &d.test_sources(), &d.test_targets()).unwrap();
    let acc = accuracy(&predicted, &d.test);
    eprintln!("held-out accuracy {acc:.3}");
    assert!(acc >= 0.8, "held-out accuracy {acc:.3}");
}

#[test]
fn training_is_deterministic() {
    let d = isomorphic();
    let cfg = TrainConfig { epochs: 20, ..Default::default() };
    let (a, _) = train(&d.kg1, &d.kg2, &d.seeds, &cfg).unwrap();
    let (b, _) = train(&d.kg1, &d.kg2, &d.seeds, &cfg).unwrap();
    for side in [exea_core::Side::Source, exea_core::Side::Target] {
        assert_eq!(a.entity_matrix(side).as_slice(), b.entity_matrix(side).as_slice());
    }
}
