//! Library results checked against exhaustive reference implementations
//! written from the definitions.

mod support;

use std::collections::BTreeSet;

use exea_core::embed::{similarity_topk, EmbeddingStore, Matrix};
use exea_core::kg::Step;
use exea_core::repair::{mine_rules, RelationAlignment};
use exea_core::{EntityId, RelationId, Side};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

// ---------------------------------------------------------------- graph

proptest! {
    #[test]
    fn functionality_counts_distinct_ends(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_edges(&mut rng, 12, 3, 25);
        let kg = build(Side::Source, 12, 3, &edges);
        for r in 0..3 {
            let rows: Vec<&Edge> = edges.iter().filter(|e| e.1 == r).collect();
            if rows.is_empty() {
                prop_assert!(kg.functionality(RelationId(r as u32)).is_err());
                continue;
            }
            let subj: BTreeSet<usize> = rows.iter().map(|e| e.0).collect();
            let obj: BTreeSet<usize> = rows.iter().map(|e| e.2).collect();
            let f = kg.functionality(RelationId(r as u32)).unwrap();
            let g = kg.inverse_functionality(RelationId(r as u32)).unwrap();
            prop_assert!((f - subj.len() as f64 / rows.len() as f64).abs() < 1e-12);
            prop_assert!((g - obj.len() as f64 / rows.len() as f64).abs() < 1e-12);
            prop_assert!(f > 0.0 && f <= 1.0 && g > 0.0 && g <= 1.0);
        }
    }

    #[test]
    fn neighborhoods_and_paths_match_brute_force(seed in 0u64..10_000, h in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10;
        let edges = random_edges(&mut rng, n, 3, 16);
        let kg = build(Side::Source, n, 3, &edges);
        let e = rng.random_range(0..n);
        let d = distances(n, &edges, e);

        let within: Vec<(EntityId, usize)> = kg.entities_within(EntityId(e as u32), h);
        let expected: Vec<(EntityId, usize)> =
            (0..n).filter(|&x| x != e && d[x] <= h).map(|x| (EntityId(x as u32), d[x])).collect();
        prop_assert_eq!(within, expected);

        let triples = kg.neighborhood_triples(EntityId(e as u32), h).unwrap();
        let expected: Vec<Edge> =
            edges.iter().copied().filter(|&(a, _, b)| d[a] < h || d[b] < h).collect();
        let got: Vec<Edge> =
            triples.iter().map(|t| (t.head.index(), t.relation.index(), t.tail.index())).collect();
        prop_assert_eq!(got, expected);

        let paths = kg.enumerate_paths(EntityId(e as u32), h).unwrap();
        let mut expected: Vec<Vec<Step>> = all_paths(&edges, e, h).iter().map(|p| as_steps(p)).collect();
        expected.sort();
        let got: Vec<Vec<Step>> = paths.iter().map(|p| p.steps.clone()).collect();
        prop_assert_eq!(got, expected);
    }
}

// ---------------------------------------------------------------- search

proptest! {
    #[test]
    fn topk_matches_full_sort(
        src in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 3), 1..6),
        tgt in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 3), 1..8),
        k in 1usize..10,
    ) {
        let norm = |v: &[f32]| v.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        prop_assume!(src.iter().chain(&tgt).all(|v| norm(v) > 1e-3));
        let store = EmbeddingStore::new(Matrix::from_rows(3, &src).unwrap(), Matrix::from_rows(3, &tgt).unwrap()).unwrap();
        let sources: Vec<EntityId> = (0..src.len() as u32).map(EntityId).collect();
        let targets: Vec<EntityId> = (0..tgt.len() as u32).map(EntityId).collect();
        let top = similarity_topk(&store, &sources, &targets, k).unwrap();
        for (i, u) in src.iter().enumerate() {
            let mut all: Vec<(usize, f64)> = tgt
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
                    (j, dot / (norm(u) * norm(v)))
                })
                .collect();
            all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let row = top.get(EntityId(i as u32)).unwrap();
            prop_assert_eq!(row.len(), k.min(tgt.len()));
            for (got, want) in row.iter().zip(&all) {
                prop_assert!((got.1 - want.1).abs() < 1e-6);
                let exact = all.iter().find(|w| w.0 == got.0.index()).unwrap().1;
                prop_assert!((got.1 - exact).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn explanation_matches_exhaustive_oracles() {
    let checked = check_explanations();
    assert!(checked > 100, "only {checked} path pairs compared");
}

#[test]
fn rule_miner_matches_brute_force() {
    let start = std::time::Instant::now();
    check_rule_miner();
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn rules_between_relations_aligned_to_one_relation_are_dropped() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let edges = random_edges(&mut rng, 30, 4, 120);
    let kg = build(Side::Source, 30, 4, &edges);
    let all = mine_rules(&kg, &RelationAlignment::default());
    let first = *all.first().expect("some rule");
    let al = RelationAlignment::from_pairs(vec![(first.r1, RelationId(0), 1.0), (first.r2, RelationId(0), 1.0)]);
    let filtered = mine_rules(&kg, &al);
    let expect: Vec<_> = all.iter().copied().filter(|r| *r != first).collect();
    assert_eq!(filtered, expect);
}
