//! Small hand-built graph pairs reproducing the worked examples used
//! throughout the tests and the CLI (`exea synth --fixture <name>`).

use crate::embed::{EmbeddingStore, Matrix};
use crate::kg::{EntityId, Kg, KgBuilder, Side};
use crate::pairs::Pair;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub kg1: Kg,
    pub kg2: Kg,
    pub store: EmbeddingStore,
    pub seeds: Vec<Pair>,
    pub predictions: Vec<Pair>,
    pub gold: Vec<Pair>,
}

impl Fixture {
    pub fn source(&self, label: &str) -> EntityId {
        self.kg1.entity_by_label(label).unwrap_or_else(|| panic!("no source entity {label}"))
    }

    pub fn target(&self, label: &str) -> EntityId {
        self.kg2.entity_by_label(label).unwrap_or_else(|| panic!("no target entity {label}"))
    }

    /// Gold pairs whose source is not a seed.
    pub fn test_gold(&self) -> Vec<Pair> {
        self.gold.iter().copied().filter(|p| !self.seeds.iter().any(|s| s.0 == p.0)).collect()
    }
}

pub const FIXTURE_NAMES: [&str; 3] = ["governor", "relation-conflict", "low-confidence"];

pub fn by_name(name: &str) -> Option<Fixture> {
    match name {
        "governor" => Some(governor()),
        "relation-conflict" => Some(relation_conflict()),
        "low-confidence" => Some(low_confidence()),
        _ => None,
    }
}

/// Adds unconnected filler triples so that `relation` ends up with exactly
/// `total` triples, `subjects` distinct subjects and `objects` distinct
/// objects. The relation must already hold exactly one triple.
fn pad_relation(b: &mut KgBuilder, relation: &str, total: usize, subjects: usize, objects: usize) {
    assert!(total > subjects.max(objects) || (total >= subjects.max(objects) && total >= 1));
    let r = b.relation(relation);
    let extra = total - 1;
    let subj: Vec<EntityId> =
        (0..subjects - 1).map(|i| b.push_entity(format!("filler:{relation}:s{i}"))).collect();
    let obj: Vec<EntityId> =
        (0..objects - 1).map(|i| b.push_entity(format!("filler:{relation}:o{i}"))).collect();
    for i in 0..extra {
        b.triple(subj[i % subj.len()], r, obj[i % obj.len()]);
    }
}

/// Fills a matrix with hand-set rows for named entities and a fixed
/// non-zero pattern for everything else.
fn vectors(kg: &Kg, dim: usize, named: &[(&str, &[f32])]) -> Matrix {
    let mut m = Matrix::zeros(kg.num_entities(), dim);
    for e in kg.entities() {
        let row = m.row_mut(e.index());
        match named.iter().find(|(l, _)| *l == kg.entity_label(e)) {
            Some((_, v)) => row.copy_from_slice(v),
            None => {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = 0.25 + ((e.index() * 7 + j * 3) % 11) as f32 * 0.05;
                }
            }
        }
    }
    m
}

fn relation_vectors(kg: &Kg, dim: usize, named: &[(&str, &[f32])]) -> Matrix {
    let mut m = Matrix::zeros(kg.num_relations(), dim);
    for r in kg.relations() {
        if let Some((_, v)) = named.iter().find(|(l, _)| *l == kg.relation_label(r)) {
            m.row_mut(r.index()).copy_from_slice(v);
        }
    }
    m
}

/// The Gavin Newsom example: a predicted pair with two strongly influential
/// edges of weights 0.759 and 0.757 and neighbor influences 0.960 and 0.937,
/// whose confidence is sigmoid(0.960 * 0.759 + 0.937 * 0.757) ~= 0.808.
///
/// Relation statistics are pinned with unconnected filler triples:
/// ifunc(前任) = 0.759, func(predecessor) = 0.860, ifunc(政党) = 0.757,
/// ifunc(party) = 0.800.
pub fn governor() -> Fixture {
    let mut b1 = KgBuilder::with_offsets(Side::Source, 0, 0);
    b1.fact("加文·纽森", "前任", "杰里·布朗");
    b1.fact("加文·纽森", "政党", "民主党");
    pad_relation(&mut b1, "前任", 1000, 1000, 759);
    pad_relation(&mut b1, "政党", 1000, 1000, 757);
    let kg1 = b1.build();

    let mut b2 = KgBuilder::with_offsets(Side::Target, 100_000, 100);
    b2.fact("Jerry Brown", "predecessor", "Gavin Newsom");
    b2.fact("Gavin Newsom", "party", "Democratic Party");
    pad_relation(&mut b2, "predecessor", 1000, 860, 1000);
    pad_relation(&mut b2, "party", 1000, 1000, 800);
    let kg2 = b2.build();

    let dp = (1.0f32 - 0.937 * 0.937).sqrt();
    let src = vectors(
        &kg1,
        4,
        &[
            ("加文·纽森", &[0.0, 1.0, 0.0, 1.0]),
            ("杰里·布朗", &[1.0, 0.0, 0.0, 0.0]),
            ("民主党", &[0.0, 0.0, 1.0, 0.0]),
        ],
    );
    let tgt = vectors(
        &kg2,
        4,
        &[
            ("Gavin Newsom", &[0.0, 1.0, 0.0, 1.0]),
            ("Jerry Brown", &[0.96, 0.28, 0.0, 0.0]),
            ("Democratic Party", &[0.0, 0.0, 0.937, dp]),
        ],
    );
    let rel1 = relation_vectors(&kg1, 4, &[("前任", &[1.0, 0.0, 0.0, 0.0]), ("政党", &[0.0, 1.0, 0.0, 0.0])]);
    let rel2 = relation_vectors(
        &kg2,
        4,
        &[("predecessor", &[1.0, 0.0, 0.0, 0.0]), ("party", &[0.0, 1.0, 0.0, 0.0])],
    );
    let store = EmbeddingStore::new(src, tgt)
        .and_then(|s| s.with_relations(Side::Source, rel1))
        .and_then(|s| s.with_relations(Side::Target, rel2))
        .expect("fixture store");

    let e1 = |l| kg1.entity_by_label(l).unwrap();
    let e2 = |l| kg2.entity_by_label(l).unwrap();
    let seeds = vec![(e1("杰里·布朗"), e2("Jerry Brown")), (e1("民主党"), e2("Democratic Party"))];
    let predictions = vec![(e1("加文·纽森"), e2("Gavin Newsom"))];
    let mut gold = seeds.clone();
    gold.extend(&predictions);
    Fixture { kg1, kg2, store, seeds, predictions, gold }
}

/// The presidential-succession example: Joe Biden is wrongly predicted to
/// align with Barack Obama. Swapping the seed pair (Donald John Trump,
/// Donald Trump) and the aligned relation (followed by, successor) yields the
/// cross-graph triple (Donald Trump, successor, Joe Biden); together with
/// (Donald Trump, predecessor, Barack Obama) the rule
/// (successor ¬sameAs predecessor) derives (Joe Biden ¬sameAs Barack Obama).
///
/// Joe Biden's wrong target is only slightly more similar than the right one,
/// and Barack Hussein Obama has a second seed neighbor, so the conflict can
/// be settled either by one-to-many repair or by re-examining the flagged
/// pair.
pub fn relation_conflict() -> Fixture {
    let mut b1 = KgBuilder::with_offsets(Side::Source, 0, 0);
    b1.fact("Donald John Trump", "followed by", "Joe Biden");
    b1.fact("Donald John Trump", "preceded by", "Barack Hussein Obama");
    b1.fact("Barack Hussein Obama", "spouse", "Michelle LaVaughn Obama");
    let kg1 = b1.build();
    let mut b2 = KgBuilder::with_offsets(Side::Target, 100, 10);
    b2.fact("Donald Trump", "successor", "Joseph Biden");
    b2.fact("Donald Trump", "predecessor", "Barack Obama");
    b2.fact("Barack Obama", "spouse", "Michelle Obama");
    let kg2 = b2.build();

    let rest = (1.0f32 - 0.5 * 0.5 - 0.55 * 0.55).sqrt();
    let src = vectors(
        &kg1,
        5,
        &[
            ("Donald John Trump", &[1.0, 0.0, 0.0, 0.0, 0.0]),
            ("Joe Biden", &[0.0, 0.5, 0.55, rest, 0.0]),
            ("Barack Hussein Obama", &[0.0, 0.0, 0.6, 0.8, 0.0]),
            ("Michelle LaVaughn Obama", &[0.0, 0.0, 0.0, 0.0, 1.0]),
        ],
    );
    let tgt = vectors(
        &kg2,
        5,
        &[
            ("Donald Trump", &[1.0, 0.0, 0.0, 0.0, 0.0]),
            ("Joseph Biden", &[0.0, 1.0, 0.0, 0.0, 0.0]),
            ("Barack Obama", &[0.0, 0.0, 1.0, 0.0, 0.0]),
            ("Michelle Obama", &[0.0, 0.0, 0.0, 0.0, 1.0]),
        ],
    );
    let rel1 = relation_vectors(
        &kg1,
        5,
        &[
            ("followed by", &[1.0, 0.0, 0.0, 0.0, 0.0]),
            ("preceded by", &[0.0, 1.0, 0.0, 0.0, 0.0]),
            ("spouse", &[0.0, 0.0, 1.0, 0.0, 0.0]),
        ],
    );
    let rel2 = relation_vectors(
        &kg2,
        5,
        &[
            ("successor", &[1.0, 0.1, 0.0, 0.0, 0.0]),
            ("predecessor", &[0.1, 1.0, 0.0, 0.0, 0.0]),
            ("spouse", &[0.0, 0.0, 1.0, 0.0, 0.0]),
        ],
    );
    let store = EmbeddingStore::new(src, tgt)
        .and_then(|s| s.with_relations(Side::Source, rel1))
        .and_then(|s| s.with_relations(Side::Target, rel2))
        .expect("fixture store");

    let e1 = |l| kg1.entity_by_label(l).unwrap();
    let e2 = |l| kg2.entity_by_label(l).unwrap();
    let seeds = vec![
        (e1("Donald John Trump"), e2("Donald Trump")),
        (e1("Michelle LaVaughn Obama"), e2("Michelle Obama")),
    ];
    let predictions = vec![
        (e1("Joe Biden"), e2("Barack Obama")),
        (e1("Barack Hussein Obama"), e2("Barack Obama")),
    ];
    let mut gold = seeds.clone();
    gold.extend([(e1("Joe Biden"), e2("Joseph Biden")), (e1("Barack Hussein Obama"), e2("Barack Obama"))]);
    Fixture { kg1, kg2, store, seeds, predictions, gold }
}

/// The Idaho example: Washington and New York City are both predicted to
/// align with New York, and Idaho is wrongly aligned with the State of
/// Oregon only through the wrong neighbor pair (Washington, New York).
/// Resolving the one-to-many conflict leaves (Idaho, State of Oregon)
/// without matched neighbors, so its confidence drops below the threshold.
pub fn low_confidence() -> Fixture {
    let mut b1 = KgBuilder::with_offsets(Side::Source, 0, 0);
    b1.fact("New York City", "located in", "New York State");
    b1.fact("New York City", "country", "United States");
    b1.fact("Idaho", "borders", "Washington");
    b1.fact("Washington", "capital", "Olympia");
    let kg1 = b1.build();
    let mut b2 = KgBuilder::with_offsets(Side::Target, 100, 10);
    b2.fact("New York", "located in", "State of New York");
    b2.fact("New York", "country", "USA");
    b2.fact("State of Oregon", "borders", "New York");
    b2.fact("Idaho (state)", "borders", "Washington (state)");
    b2.fact("Washington (state)", "capital", "Olympia, WA");
    let kg2 = b2.build();

    let tail = 0.15f32.sqrt();
    let src = vectors(
        &kg1,
        8,
        &[
            ("New York City", &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ("Washington", &[0.7, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, tail]),
            ("Idaho", &[0.0, 0.0, 0.7, 0.6, 0.0, 0.0, 0.0, tail]),
            ("New York State", &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
            ("United States", &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            ("Olympia", &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        ],
    );
    let tgt = vectors(
        &kg2,
        8,
        &[
            ("New York", &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ("Washington (state)", &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ("State of Oregon", &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ("Idaho (state)", &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            ("State of New York", &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
            ("USA", &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            ("Olympia, WA", &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        ],
    );
    let store = EmbeddingStore::new(src, tgt).expect("fixture store");

    let e1 = |l| kg1.entity_by_label(l).unwrap();
    let e2 = |l| kg2.entity_by_label(l).unwrap();
    let seeds = vec![
        (e1("New York State"), e2("State of New York")),
        (e1("United States"), e2("USA")),
        (e1("Olympia"), e2("Olympia, WA")),
    ];
    let predictions = vec![
        (e1("New York City"), e2("New York")),
        (e1("Washington"), e2("New York")),
        (e1("Idaho"), e2("State of Oregon")),
    ];
    let mut gold = seeds.clone();
    gold.extend([
        (e1("New York City"), e2("New York")),
        (e1("Washington"), e2("Washington (state)")),
        (e1("Idaho"), e2("Idaho (state)")),
    ]);
    Fixture { kg1, kg2, store, seeds, predictions, gold }
}
