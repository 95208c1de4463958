//! Exhaustive reference implementations written from the definitions,
//! shared by the oracle tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use exea_core::embed::{EmbeddingStore, Matrix};
use exea_core::explain::matched_neighbors;
use exea_core::kg::{Direction, Step};
use exea_core::repair::{mine_rules, mine_rules_naive, RelationAlignment};
use exea_core::{EntityId, ExplainContext, Kg, KgBuilder, PairSet, PathMode, RelationId, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Edge = (usize, usize, usize);

pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, n_rel: usize, m: usize) -> Vec<Edge> {
    let mut set = BTreeSet::new();
    while set.len() < m {
        let (h, t) = (rng.random_range(0..n), rng.random_range(0..n));
        if h != t {
            set.insert((h, rng.random_range(0..n_rel), t));
        }
    }
    set.into_iter().collect()
}

pub fn build(side: Side, n: usize, n_rel: usize, edges: &[Edge]) -> Kg {
    let mut b = KgBuilder::new(side);
    let ents: Vec<EntityId> = (0..n).map(|i| b.entity(&format!("e{i}"))).collect();
    let rels: Vec<RelationId> = (0..n_rel).map(|i| b.relation(&format!("r{i}"))).collect();
    for &(h, r, t) in edges {
        b.triple(ents[h], rels[r], ents[t]);
    }
    b.build()
}

/// Undirected hop distances from `e` by repeated relaxation over the edge list.
pub fn distances(n: usize, edges: &[Edge], e: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; n];
    d[e] = 0;
    for _ in 0..n {
        for &(h, _, t) in edges {
            if d[h] != usize::MAX {
                d[t] = d[t].min(d[h] + 1);
            }
            if d[t] != usize::MAX {
                d[h] = d[h].min(d[t] + 1);
            }
        }
    }
    d
}

/// Every simple path of length 1..=h from `e`, as step lists.
pub fn all_paths(edges: &[Edge], e: usize, h: usize) -> Vec<Vec<(Direction, usize, usize)>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<(Direction, usize, usize)>> = vec![Vec::new()];
    while let Some(p) = stack.pop() {
        if p.len() == h {
            continue;
        }
        let at = p.last().map_or(e, |s| s.2);
        for &(a, r, b) in edges {
            for (dir, from, to) in [(Direction::Outgoing, a, b), (Direction::Incoming, b, a)] {
                if from == at && to != e && !p.iter().any(|s| s.2 == to) {
                    let mut q = p.clone();
                    q.push((dir, r, to));
                    out.push(q.clone());
                    stack.push(q);
                }
            }
        }
    }
    out
}

pub fn as_steps(p: &[(Direction, usize, usize)]) -> Vec<Step> {
    p.iter()
        .map(|&(direction, r, x)| Step { direction, relation: RelationId(r as u32), entity: EntityId(x as u32) })
        .collect()
}

pub struct World {
    pub n1: usize,
    pub n2: usize,
    pub e1: Vec<Edge>,
    pub e2: Vec<Edge>,
    pub kg1: Kg,
    pub kg2: Kg,
    pub store: EmbeddingStore,
    pub view: PairSet,
    /// Raw vectors for the oracle: entities then relations, per side.
    pub ent: [Vec<Vec<f64>>; 2],
    pub rel: [Vec<Vec<f64>>; 2],
}

pub fn world(seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n1, n2, n_rel, dim) = (rng.random_range(8..=30), rng.random_range(8..=30), 4, 4);
    let (m1, m2) = (rng.random_range(n1..2 * n1), rng.random_range(n2..2 * n2));
    let e1 = random_edges(&mut rng, n1, n_rel, m1);
    let e2 = random_edges(&mut rng, n2, n_rel, m2);
    let (kg1, kg2) = (build(Side::Source, n1, n_rel, &e1), build(Side::Target, n2, n_rel, &e2));
    let mut vecs = |count: usize| -> Vec<Vec<f64>> {
        (0..count).map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0) as f64).collect()).collect()
    };
    let ent = [vecs(n1), vecs(n2)];
    let rel = [vecs(n_rel), vecs(n_rel)];
    let m = |rows: &Vec<Vec<f64>>| {
        Matrix::from_rows(dim, rows.iter().map(|r| r.iter().map(|&x| x as f32).collect::<Vec<f32>>())).unwrap()
    };
    let store = EmbeddingStore::new(m(&ent[0]), m(&ent[1]))
        .unwrap()
        .with_relations(Side::Source, m(&rel[0]))
        .unwrap()
        .with_relations(Side::Target, m(&rel[1]))
        .unwrap();
    // Stored values are f32; the oracle must see the same numbers.
    let round = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        v.into_iter().map(|r| r.into_iter().map(|x| x as f32 as f64).collect()).collect()
    };
    let [a, b] = ent;
    let [c, d] = rel;
    let mut view = PairSet::new();
    for _ in 0..n1.min(n2) {
        view.insert(EntityId(rng.random_range(0..n1) as u32), EntityId(rng.random_range(0..n2) as u32));
    }
    World { n1, n2, e1, e2, kg1, kg2, store, view, ent: [round(a), round(b)], rel: [round(c), round(d)] }
}

pub fn path_vec(ent: &[Vec<f64>], rel: &[Vec<f64>], center: usize, p: &[(Direction, usize, usize)]) -> Vec<f64> {
    let n = p.len() as f64;
    let mut e = ent[center].clone();
    for s in &p[..p.len() - 1] {
        e.iter_mut().zip(&ent[s.2]).for_each(|(a, b)| *a += b);
    }
    let mut r = vec![0.0; e.len()];
    for s in p {
        r.iter_mut().zip(&rel[s.1]).for_each(|(a, b)| *a += b);
    }
    e.into_iter().chain(r).map(|x| x / n).collect()
}

pub fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

pub type OraclePair = (Vec<Step>, Vec<Step>, f64);

/// Path pairs where each path is the other's best match (first in path order
/// among equals), found by checking every candidate pair.
pub fn oracle_paths(w: &World, pair: (usize, usize), nb: (usize, usize), h: usize) -> Vec<OraclePair> {
    let mut a: Vec<_> = all_paths(&w.e1, pair.0, h).into_iter().filter(|p| p.last().unwrap().2 == nb.0).collect();
    let mut b: Vec<_> = all_paths(&w.e2, pair.1, h).into_iter().filter(|p| p.last().unwrap().2 == nb.1).collect();
    a.sort_by_key(|p| as_steps(p));
    b.sort_by_key(|p| as_steps(p));
    let va: Vec<_> = a.iter().map(|p| path_vec(&w.ent[0], &w.rel[0], pair.0, p)).collect();
    let vb: Vec<_> = b.iter().map(|p| path_vec(&w.ent[1], &w.rel[1], pair.1, p)).collect();
    let s = |i: usize, j: usize| cos(&va[i], &vb[j]);
    let mut out = Vec::new();
    for i in 0..a.len() {
        for j in 0..b.len() {
            let row_best = (0..b.len()).all(|k| if k < j { s(i, k) < s(i, j) } else { s(i, k) <= s(i, j) });
            let col_best = (0..a.len()).all(|k| if k < i { s(k, j) < s(i, j) } else { s(k, j) <= s(i, j) });
            if row_best && col_best {
                out.push((as_steps(&a[i]), as_steps(&b[j]), s(i, j)));
            }
        }
    }
    out
}

/// Checks neighbor and path matching against the oracles on seeds
/// `0..50`; returns the number of path pairs compared.
pub fn check_explanations() -> usize {
    let mut checked = 0;
    for seed in 0..50u64 {
        let w = world(seed);
        let h = 2;
        let ctx = ExplainContext::new(&w.kg1, &w.kg2, &w.store, h, PathMode::Unsigned).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        for _ in 0..5 {
            let pair = (rng.random_range(0..w.n1), rng.random_range(0..w.n2));
            let p = (EntityId(pair.0 as u32), EntityId(pair.1 as u32));
            let d1 = distances(w.n1, &w.e1, pair.0);
            let d2 = distances(w.n2, &w.e2, pair.1);

            let expected: BTreeSet<(EntityId, EntityId)> = w
                .view
                .iter()
                .filter(|&(a, b)| a != p.0 && b != p.1 && d1[a.index()] <= h && d2[b.index()] <= h)
                .collect();
            let got = matched_neighbors(p, &w.kg1, &w.kg2, &w.view, h).unwrap();
            assert_eq!(got.iter().copied().collect::<BTreeSet<_>>(), expected, "seed {seed} pair {pair:?}");
            assert_eq!(got.len(), expected.len());

            let expl = ctx.explain(p, &w.view).unwrap();
            let mut want: Vec<OraclePair> = Vec::new();
            for nb in &expected {
                want.extend(oracle_paths(&w, pair, (nb.0.index(), nb.1.index()), h));
            }
            let mut have: Vec<OraclePair> = expl
                .path_pairs
                .iter()
                .map(|pp| (pp.source_path.steps.clone(), pp.target_path.steps.clone(), pp.similarity))
                .collect();
            want.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
            have.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
            assert_eq!(have.len(), want.len(), "seed {seed} pair {pair:?}");
            checked += have.len();
            for (x, y) in have.iter().zip(&want) {
                assert_eq!((&x.0, &x.1), (&y.0, &y.1));
                assert!((x.2 - y.2).abs() < 1e-9);
            }
            // One neighbor at a time gives the same pairs.
            let per: usize = expected.iter().map(|&nb| ctx.match_paths(p, nb).unwrap().len()).sum();
            assert_eq!(per, want.len());
        }
    }
    checked
}



/// Rules by definition: for every ordered relation pair and every entity.
pub fn brute_force_rules(kg: &Kg, n: usize, n_rel: usize, edges: &[Edge]) -> Vec<(usize, usize)> {
    let has: BTreeSet<Edge> = edges.iter().copied().collect();
    let mut out = Vec::new();
    for r1 in 0..n_rel {
        for r2 in r1 + 1..n_rel {
            let mut overlap = false;
            let mut witness = false;
            for x in 0..n {
                for y in 0..n {
                    if has.contains(&(x, r1, y)) && has.contains(&(x, r2, y)) {
                        overlap = true;
                    }
                    for z in 0..n {
                        if y != z && has.contains(&(x, r1, y)) && has.contains(&(x, r2, z)) {
                            witness = true;
                        }
                    }
                }
            }
            if witness && !overlap {
                out.push((r1, r2));
            }
        }
    }
    assert_eq!(kg.num_relations(), n_rel);
    out
}

/// Compares both miners with the brute-force rules on 10 random
/// 300-triple graphs.
pub fn check_rule_miner() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, n_rel) = (60, 8);
        let edges = random_edges(&mut rng, n, n_rel, 300);
        let kg = build(Side::Source, n, n_rel, &edges);
        let want = brute_force_rules(&kg, n, n_rel, &edges);
        let got: Vec<(usize, usize)> =
            mine_rules(&kg, &RelationAlignment::default()).iter().map(|r| (r.r1.index(), r.r2.index())).collect();
        assert_eq!(got, want, "seed {seed}");
        let naive: Vec<(usize, usize)> = mine_rules_naive(&kg).iter().map(|r| (r.r1.index(), r.r2.index())).collect();
        assert_eq!(naive, want);
    }
}
