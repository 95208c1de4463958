//! Synthetic graph pairs with a known gold alignment.
//!
//! The source graph is a random connected graph over skewed relations. The
//! target graph is a relabelled copy with a fraction of triples dropped or
//! rewired. Embeddings are built from a shared random vector per gold pair
//! plus independent Gaussian noise on each side, so the raw greedy
//! alignment is imperfect in a controlled way. Conflict injection moves
//! some source vectors towards the target of another source, creating
//! one-to-many conflicts whose correct target is ranked second.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embed::{greedy_align, write_embedding_text, EmbeddingStore, Matrix};
use crate::error::{Error, Result};
use crate::kg::{write_kg, EntityId, Kg, KgBuilder, RelationId, Side};
use crate::pairs::{format_pairs, Pair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    /// Triples per entity in the source graph.
    pub density: f64,
    /// Fraction of target triples dropped or rewired.
    pub rename_noise: f64,
    pub seed_fraction: f64,
    /// Per-coordinate standard deviation of the embedding noise.
    pub embedding_noise: f64,
    /// Fraction of test sources pushed towards another source's target.
    pub conflict_injection: f64,
    pub rng_seed: u64,
    pub dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_entities: 200,
            n_relations: 12,
            density: 3.0,
            rename_noise: 0.1,
            seed_fraction: 0.3,
            embedding_noise: 0.1,
            conflict_injection: 0.0,
            rng_seed: 1,
            dim: 32,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DegenerateConfig(m));
        if self.n_entities < 4 {
            return bad(format!("n_entities must be at least 4, got {}", self.n_entities));
        }
        if self.n_relations == 0 {
            return bad("n_relations must be at least 1".into());
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.density.is_finite() && self.density >= 1.0) {
            return bad(format!("density must be at least 1, got {}", self.density));
        }
        let max_triples = (self.n_entities * (self.n_entities - 1) * self.n_relations) as f64;
        if self.density * self.n_entities as f64 > max_triples {
            return bad(format!("density {} exceeds the number of possible triples", self.density));
        }
        for (name, v) in [
            ("rename_noise", self.rename_noise),
            ("seed_fraction", self.seed_fraction),
            ("conflict_injection", self.conflict_injection),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction < 1.0) {
            return bad(format!("seed_fraction must lie strictly between 0 and 1, got {}", self.seed_fraction));
        }
        if !(self.embedding_noise.is_finite() && self.embedding_noise >= 0.0) {
            return bad(format!("embedding_noise must be non-negative, got {}", self.embedding_noise));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthPair {
    pub kg1: Kg,
    pub kg2: Kg,
    /// Every gold pair, seeds included, in source order.
    pub gold: Vec<Pair>,
    pub seeds: Vec<Pair>,
    /// Gold pairs whose source is not a seed.
    pub test: Vec<Pair>,
    /// Noisy embeddings, with relation-name vectors.
    pub store: EmbeddingStore,
    /// Noise-free embeddings.
    pub ideal: EmbeddingStore,
    /// Raw greedy alignment of the test sources over the non-seed targets.
    pub predictions: Vec<Pair>,
    /// Sources whose vectors were moved towards another target.
    pub injected: Vec<EntityId>,
}

impl SynthPair {
    pub fn test_sources(&self) -> Vec<EntityId> {
        self.test.iter().map(|p| p.0).collect()
    }

    pub fn test_targets(&self) -> Vec<EntityId> {
        let seeded: BTreeSet<EntityId> = self.seeds.iter().map(|p| p.1).collect();
        self.kg2.entities().filter(|t| !seeded.contains(t)).collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// Returns true when the two sets were distinct.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn noisy(rng: &mut ChaCha8Rng, base: &[f64], sigma: f64) -> Vec<f32> {
    let v: Vec<f64> = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        base.iter().map(|x| x + normal.sample(rng)).collect()
    } else {
        base.to_vec()
    };
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter().map(|x| (x / n) as f32).collect()
}

/// Relation drawn with probability proportional to `1 / (rank + 1)`.
fn skewed_relation(rng: &mut ChaCha8Rng, cumulative: &[f64]) -> usize {
    let x = rng.random_range(0.0..*cumulative.last().expect("relations"));
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthPair> {
    cfg.validate()?;
    let n = cfg.n_entities;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let cumulative: Vec<f64> = (0..cfg.n_relations)
        .scan(0.0, |acc, r| {
            *acc += 1.0 / (r as f64 + 1.0);
            Some(*acc)
        })
        .collect();

    // Source graph: a random spanning tree, then random extra edges.
    let mut triples: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        let r = skewed_relation(&mut rng, &cumulative);
        triples.insert(if rng.random_bool(0.5) { (i, r, j) } else { (j, r, i) });
    }
    let wanted = (cfg.density * n as f64).round() as usize;
    while triples.len() < wanted {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if h != t {
            triples.insert((h, skewed_relation(&mut rng, &cumulative), t));
        }
    }

    // Target graph: relabelled copy, some triples dropped or rewired.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut rel_perm: Vec<usize> = (0..cfg.n_relations).collect();
    rel_perm.shuffle(&mut rng);
    let mut copied: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut dropped = Vec::new();
    for &(h, r, t) in &triples {
        let mapped = (perm[h], rel_perm[r], perm[t]);
        if rng.random_bool(cfg.rename_noise) {
            dropped.push(mapped);
            if rng.random_bool(0.5) {
                let t2 = rng.random_range(0..n);
                if t2 != mapped.0 {
                    copied.insert((mapped.0, mapped.1, t2));
                }
            }
        } else {
            copied.insert(mapped);
        }
    }
    // Restore dropped triples that reconnect components; the source graph is
    // connected, so this leaves the target graph connected too.
    let mut uf = UnionFind::new(n);
    for &(h, _, t) in &copied {
        uf.union(h, t);
    }
    for &(h, r, t) in dropped.iter() {
        if uf.union(h, t) {
            copied.insert((h, r, t));
        }
    }

    let mut b1 = KgBuilder::with_offsets(Side::Source, 0, 0);
    for i in 0..n {
        b1.push_entity(format!("src:{i}"));
    }
    for r in 0..cfg.n_relations {
        b1.relation(&format!("src-rel:{r}"));
    }
    for &(h, r, t) in &triples {
        b1.triple(EntityId(h as u32), RelationId(r as u32), EntityId(t as u32));
    }
    let mut b2 = KgBuilder::with_offsets(Side::Target, n as u64, cfg.n_relations as u64);
    for i in 0..n {
        b2.push_entity(format!("tgt:{i}"));
    }
    for r in 0..cfg.n_relations {
        b2.relation(&format!("tgt-rel:{r}"));
    }
    for &(h, r, t) in &copied {
        b2.triple(EntityId(h as u32), RelationId(r as u32), EntityId(t as u32));
    }
    let (kg1, kg2) = (b1.build(), b2.build());

    let gold: Vec<Pair> = (0..n).map(|i| (EntityId(i as u32), EntityId(perm[i] as u32))).collect();
    let n_seeds = ((cfg.seed_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut chosen: Vec<usize> = (0..n).collect();
    chosen.shuffle(&mut rng);
    let seed_set: BTreeSet<usize> = chosen[..n_seeds].iter().copied().collect();
    let seeds: Vec<Pair> = seed_set.iter().map(|&i| gold[i]).collect();
    let test: Vec<Pair> = (0..n).filter(|i| !seed_set.contains(i)).map(|i| gold[i]).collect();

    // Embeddings.
    let base: Vec<Vec<f64>> = (0..n).map(|_| unit(&mut rng, cfg.dim)).collect();
    let mut src_base = base.clone();
    let mut injected = Vec::new();
    let test_idx: Vec<usize> = test.iter().map(|p| p.0.index()).collect();
    let n_inject = (cfg.conflict_injection * test_idx.len() as f64).round() as usize;
    if n_inject > 0 {
        let mut order = test_idx.clone();
        order.shuffle(&mut rng);
        let test_set: BTreeSet<usize> = test_idx.iter().copied().collect();
        // Some triple of `s` survives in the target graph, so `s` keeps a
        // matched neighbor once its neighbor is aligned.
        let keeps_a_neighbor = |s: usize| {
            let e = EntityId(s as u32);
            let out = kg1.outgoing(e).iter().map(|&(r, t)| (s, r.index(), t.index()));
            let inc = kg1.incoming(e).iter().map(|&(r, h)| (h.index(), r.index(), s));
            out.chain(inc).any(|(h, r, t)| copied.contains(&(perm[h], rel_perm[r], perm[t])))
        };
        let mut used: BTreeSet<usize> = BTreeSet::new();
        for &s in &order {
            if injected.len() >= n_inject {
                break;
            }
            if used.contains(&s) || !keeps_a_neighbor(s) {
                continue;
            }
            // Prefer a test source sharing a neighbor with `s`.
            let near: Vec<usize> = kg1
                .entities_within(EntityId(s as u32), 2)
                .into_iter()
                .map(|(e, _)| e.index())
                .filter(|e| test_set.contains(e) && !used.contains(e) && *e != s)
                .collect();
            let other = match near.choose(&mut rng) {
                Some(&o) => o,
                None => match order.iter().find(|&&o| o != s && !used.contains(&o)) {
                    Some(&o) => o,
                    None => break,
                },
            };
            used.insert(s);
            used.insert(other);
            src_base[s] = base[other].iter().zip(&base[s]).map(|(a, b)| 0.8 * a + 0.6 * b).collect();
            injected.push(EntityId(s as u32));
        }
        injected.sort_unstable();
    }

    let dim = cfg.dim;
    let mut ideal_src = Matrix::zeros(n, dim);
    let mut ideal_tgt = Matrix::zeros(n, dim);
    let mut src = Matrix::zeros(n, dim);
    let mut tgt = Matrix::zeros(n, dim);
    for i in 0..n {
        let exact = noisy(&mut rng, &base[i], 0.0);
        ideal_src.row_mut(i).copy_from_slice(&exact);
        ideal_tgt.row_mut(perm[i]).copy_from_slice(&exact);
        let s = noisy(&mut rng, &src_base[i], cfg.embedding_noise);
        src.row_mut(i).copy_from_slice(&s);
        let t = noisy(&mut rng, &base[i], cfg.embedding_noise);
        tgt.row_mut(perm[i]).copy_from_slice(&t);
    }
    let mut names1 = Matrix::zeros(cfg.n_relations, dim);
    let mut names2 = Matrix::zeros(cfg.n_relations, dim);
    for r in 0..cfg.n_relations {
        let u = unit(&mut rng, dim);
        let a = noisy(&mut rng, &u, cfg.embedding_noise);
        names1.row_mut(r).copy_from_slice(&a);
        let b = noisy(&mut rng, &u, cfg.embedding_noise);
        names2.row_mut(rel_perm[r]).copy_from_slice(&b);
    }
    let store = EmbeddingStore::new(src, tgt)?
        .with_relation_names(Side::Source, names1)?
        .with_relation_names(Side::Target, names2)?;
    let ideal = EmbeddingStore::new(ideal_src, ideal_tgt)?;

    let mut out = SynthPair { kg1, kg2, gold, seeds, test, store, ideal, predictions: Vec::new(), injected };
    let (sources, targets) = (out.test_sources(), out.test_targets());
    out.predictions = greedy_align(&out.store, &sources, &targets)?;
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes a graph as `triples.tsv`, `ent_ids.tsv` and `rel_ids.tsv` in `dir`.
pub fn write_kg_dir(kg: &Kg, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (mut t, mut e, mut r) = (String::new(), String::new(), String::new());
    write_kg(kg, &mut t, &mut e, &mut r);
    write(&dir.join("triples.tsv"), &t)?;
    write(&dir.join("ent_ids.tsv"), &e)?;
    write(&dir.join("rel_ids.tsv"), &r)
}

/// Writes the dataset layout read by the command line tool:
/// `kg1/`, `kg2/`, `seeds.tsv`, `test.tsv`, `gold.tsv`, `pred.tsv`,
/// `emb.tsv` and `emb_ideal.tsv`.
pub fn write_dataset(dir: &Path, pair: &SynthPair) -> Result<Vec<std::path::PathBuf>> {
    write_files(dir, &pair.kg1, &pair.kg2, &pair.seeds, &pair.test, &pair.gold, &pair.predictions, &pair.store, Some(&pair.ideal))
}

#[allow(clippy::too_many_arguments)]
pub fn write_files(
    dir: &Path,
    kg1: &Kg,
    kg2: &Kg,
    seeds: &[Pair],
    test: &[Pair],
    gold: &[Pair],
    predictions: &[Pair],
    store: &EmbeddingStore,
    ideal: Option<&EmbeddingStore>,
) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_kg_dir(kg1, &dir.join("kg1"))?;
    write_kg_dir(kg2, &dir.join("kg2"))?;
    let mut written = Vec::new();
    for sub in ["kg1", "kg2"] {
        for f in ["triples.tsv", "ent_ids.tsv", "rel_ids.tsv"] {
            written.push(dir.join(sub).join(f));
        }
    }
    for (name, pairs) in [("seeds.tsv", seeds), ("test.tsv", test), ("gold.tsv", gold), ("pred.tsv", predictions)] {
        write(&dir.join(name), &format_pairs(pairs, kg1, kg2))?;
        written.push(dir.join(name));
    }
    write(&dir.join("emb.tsv"), &write_embedding_text(store, kg1, kg2))?;
    written.push(dir.join("emb.tsv"));
    if let Some(ideal) = ideal {
        write(&dir.join("emb_ideal.tsv"), &write_embedding_text(ideal, kg1, kg2))?;
        written.push(dir.join("emb_ideal.tsv"));
    }
    Ok(written)
}
