//! Shared inputs for the benchmarks.

use exea_core::repair::RepairInput;
use exea_core::synth::generate;
use exea_core::{EntityId, PairSet, SynthConfig, SynthPair};

/// A generated graph pair of `n` entities per side with a fifth of the test
/// sources pulled towards a wrong target.
pub fn dataset(n: usize) -> SynthPair {
    generate(&SynthConfig { n_entities: n, conflict_injection: 0.2, ..Default::default() }).expect("valid generator config")
}

/// Seeds and predictions as one alignment view.
pub fn view(d: &SynthPair) -> PairSet {
    d.seeds.iter().chain(&d.predictions).copied().collect()
}

pub struct Owned {
    pub sources: Vec<EntityId>,
    pub targets: Vec<EntityId>,
}

impl Owned {
    pub fn of(d: &SynthPair) -> Self {
        Owned { sources: d.test_sources(), targets: d.test_targets() }
    }

    pub fn input<'a>(&'a self, d: &'a SynthPair) -> RepairInput<'a> {
        RepairInput {
            kg1: &d.kg1,
            kg2: &d.kg2,
            store: &d.store,
            seeds: &d.seeds,
            predictions: &d.predictions,
            sources: &self.sources,
            targets: &self.targets,
        }
    }
}
