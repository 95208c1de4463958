//! A small translational embedding trainer used to produce entity and
//! relation vectors when no external model is available, and to retrain on
//! reduced graphs when measuring fidelity.
//!
//! Both graphs are embedded in one space. Seed pairs share a single vector,
//! which is what pulls the two graphs together. Each triple `(h, r, t)` is
//! scored by `||h + r - t||²` and trained against corrupted triples with a
//! margin ranking loss.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingStore, Matrix};
use crate::error::{Error, Result};
use crate::kg::{EntityId, Kg, Side};
use crate::pairs::Pair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives_per_positive: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { dim: 32, epochs: 200, learning_rate: 0.05, negatives_per_positive: 2, margin: 1.0, seed: 7 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidConfig(format!("margin must be non-negative, got {}", self.margin)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrainReport {
    /// Mean loss per positive triple for each epoch.
    pub epoch_losses: Vec<f64>,
    pub warnings: Vec<String>,
}

struct Space {
    /// Slot of each source entity, then of each target entity.
    slot: [Vec<usize>; 2],
    entities: Vec<f32>,
    relations: [Vec<f32>; 2],
}

impl Space {
    fn entity(&self, side: Side, e: EntityId) -> usize {
        self.slot[side as usize][e.index()]
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, out: &mut [f32]) {
    let bound = 6.0 / (dim as f64).sqrt();
    for x in out.iter_mut() {
        *x = rng.random_range(-bound..bound) as f32;
    }
    normalize(out);
}

fn normalize(v: &mut [f32]) {
    let n = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / n) as f32;
        }
    }
}

/// Squared distance `||h + r - t||²` and the residual `h + r - t`.
fn residual(h: &[f32], r: &[f32], t: &[f32], out: &mut [f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..out.len() {
        out[i] = f64::from(h[i]) + f64::from(r[i]) - f64::from(t[i]);
        d += out[i] * out[i];
    }
    d
}

fn step(v: &mut [f32], grad: &[f64], scale: f64) {
    for (x, g) in v.iter_mut().zip(grad) {
        *x = (f64::from(*x) - scale * g) as f32;
    }
}

/// Trains vectors for both graphs. Seeds must refer to entities of `kg1`
/// and `kg2` respectively.
pub fn train(kg1: &Kg, kg2: &Kg, seeds: &[Pair], cfg: &TrainConfig) -> Result<(EmbeddingStore, TrainReport)> {
    cfg.validate()?;
    for kg in [kg1, kg2] {
        if kg.triples().is_empty() {
            return Err(Error::EmptyKg(kg.side()));
        }
    }
    let mut report = TrainReport::default();
    if seeds.is_empty() {
        report.warnings.push("no seed pairs: the two graphs are trained independently".into());
        log::warn!("{}", report.warnings[0]);
    }
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut slot_src: Vec<usize> = (0..kg1.num_entities()).collect();
    let mut slot_tgt: Vec<Option<usize>> = vec![None; kg2.num_entities()];
    for &(s, t) in seeds {
        kg1.check_entity(s)?;
        kg2.check_entity(t)?;
        match slot_tgt[t.index()] {
            // A target seeded twice joins the first source's slot.
            Some(existing) => slot_src[s.index()] = existing,
            None => slot_tgt[t.index()] = Some(slot_src[s.index()]),
        }
    }
    let mut next = kg1.num_entities();
    let slot_tgt: Vec<usize> = slot_tgt
        .into_iter()
        .map(|s| {
            s.unwrap_or_else(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    let mut space = Space {
        slot: [slot_src, slot_tgt],
        entities: vec![0.0; next * dim],
        relations: [vec![0.0; kg1.num_relations() * dim], vec![0.0; kg2.num_relations() * dim]],
    };
    for chunk in space.entities.chunks_mut(dim) {
        random_unit(&mut rng, dim, chunk);
    }
    for side in 0..2 {
        for chunk in space.relations[side].chunks_mut(dim) {
            random_unit(&mut rng, dim, chunk);
        }
    }

    let mut order: Vec<(Side, usize)> = (0..kg1.triples().len())
        .map(|i| (Side::Source, i))
        .chain((0..kg2.triples().len()).map(|i| (Side::Target, i)))
        .collect();
    let lr = cfg.learning_rate;
    let mut pos = vec![0.0f64; dim];
    let mut neg = vec![0.0f64; dim];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &(side, i) in &order {
            let kg = if side == Side::Source { kg1 } else { kg2 };
            let t = kg.triples()[i];
            for _ in 0..cfg.negatives_per_positive {
                let mut corrupt = t;
                // Resample a few times when the corruption is a true triple.
                for _ in 0..10 {
                    corrupt = t;
                    let e = EntityId(rng.random_range(0..kg.num_entities() as u32));
                    if rng.random_bool(0.5) {
                        corrupt.head = e;
                    } else {
                        corrupt.tail = e;
                    }
                    if !kg.contains(&corrupt) {
                        break;
                    }
                }
                let (h, tl) = (space.entity(side, t.head), space.entity(side, t.tail));
                let (nh, nt) = (space.entity(side, corrupt.head), space.entity(side, corrupt.tail));
                let r = t.relation.index();
                let ent = &space.entities;
                let rel = &space.relations[side as usize][r * dim..(r + 1) * dim];
                let dp = residual(&ent[h * dim..(h + 1) * dim], rel, &ent[tl * dim..(tl + 1) * dim], &mut pos);
                let dn = residual(&ent[nh * dim..(nh + 1) * dim], rel, &ent[nt * dim..(nt + 1) * dim], &mut neg);
                let loss = cfg.margin + dp - dn;
                if loss <= 0.0 {
                    continue;
                }
                total += loss;
                // d/dh ||h + r - t||² = 2 (h + r - t); the tail gets the opposite sign.
                let s = 2.0 * lr;
                step(&mut space.entities[h * dim..(h + 1) * dim], &pos, s);
                step(&mut space.entities[tl * dim..(tl + 1) * dim], &pos, -s);
                step(&mut space.entities[nh * dim..(nh + 1) * dim], &neg, -s);
                step(&mut space.entities[nt * dim..(nt + 1) * dim], &neg, s);
                let rel = &mut space.relations[side as usize][r * dim..(r + 1) * dim];
                let diff: Vec<f64> = pos.iter().zip(&neg).map(|(a, b)| a - b).collect();
                step(rel, &diff, s);
                for e in [h, tl, nh, nt] {
                    normalize(&mut space.entities[e * dim..(e + 1) * dim]);
                }
            }
        }
        let mean = total / order.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::TrainerFailure("loss diverged".into()));
        }
        report.epoch_losses.push(mean);
    }

    let matrix = |side: Side, n: usize| {
        let mut m = Matrix::zeros(n, dim);
        for i in 0..n {
            let s = space.slot[side as usize][i];
            m.row_mut(i).copy_from_slice(&space.entities[s * dim..(s + 1) * dim]);
        }
        m
    };
    let rel = |side: Side, n: usize| {
        let mut m = Matrix::zeros(n, dim);
        for i in 0..n {
            m.row_mut(i).copy_from_slice(&space.relations[side as usize][i * dim..(i + 1) * dim]);
        }
        m
    };
    let store = EmbeddingStore::new(matrix(Side::Source, kg1.num_entities()), matrix(Side::Target, kg2.num_entities()))?
        .with_relations(Side::Source, rel(Side::Source, kg1.num_relations()))?
        .with_relations(Side::Target, rel(Side::Target, kg2.num_relations()))?;
    Ok((store, report))
}
