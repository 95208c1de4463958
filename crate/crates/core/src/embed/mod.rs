//! Entity and relation vectors in a shared space, plus the derived relation
//! and path representations used for explanation.

mod format;
mod search;

pub use format::{attach_relation_names, read_embedding_file, write_embedding_binary, write_embedding_text, BlockKind};
pub use search::{cosine, greedy_align, similarity_topk, SimilarityTopK};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, Kg, RelationId, RelationPath, Side};

/// Row-major `rows × dim` matrix of 32-bit reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Matrix { dim, data: vec![0.0; rows * dim] }
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut data = Vec::new();
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    fn first_non_finite_row(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite()).map(|i| i / self.dim.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entities: [Matrix; 2],
    relations: [Option<Matrix>; 2],
    relation_names: [Option<Matrix>; 2],
}

fn slot(side: Side) -> usize {
    match side {
        Side::Source => 0,
        Side::Target => 1,
    }
}

impl EmbeddingStore {
    pub fn new(source: Matrix, target: Matrix) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), got: target.dim() });
        }
        for (side, m) in [(Side::Source, &source), (Side::Target, &target)] {
            if let Some(row) = m.first_non_finite_row() {
                return Err(Error::NonFinite { side, row });
            }
        }
        Ok(EmbeddingStore {
            dim: source.dim(),
            entities: [source, target],
            relations: [None, None],
            relation_names: [None, None],
        })
    }

    /// Attaches model-native relation vectors for one side.
    pub fn with_relations(mut self, side: Side, m: Matrix) -> Result<Self> {
        self.check_matrix(side, &m)?;
        self.relations[slot(side)] = Some(m);
        Ok(self)
    }

    /// Attaches precomputed relation-name encodings for one side. Their
    /// dimension may differ from the entity dimension.
    pub fn with_relation_names(mut self, side: Side, m: Matrix) -> Result<Self> {
        if let Some(row) = m.first_non_finite_row() {
            return Err(Error::NonFinite { side, row });
        }
        self.relation_names[slot(side)] = Some(m);
        Ok(self)
    }

    fn check_matrix(&self, side: Side, m: &Matrix) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.dim() });
        }
        if let Some(row) = m.first_non_finite_row() {
            return Err(Error::NonFinite { side, row });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_matrix(&self, side: Side) -> &Matrix {
        &self.entities[slot(side)]
    }

    pub fn relation_matrix(&self, side: Side) -> Option<&Matrix> {
        self.relations[slot(side)].as_ref()
    }

    pub fn relation_name_matrix(&self, side: Side) -> Option<&Matrix> {
        self.relation_names[slot(side)].as_ref()
    }

    pub fn entity(&self, side: Side, e: EntityId) -> Result<&[f32]> {
        let m = self.entity_matrix(side);
        if e.index() < m.rows() {
            Ok(m.row(e.index()))
        } else {
            Err(Error::MissingEmbedding { side, what: "entity", index: e.0 })
        }
    }

    /// Checks that every entity of `kg` has a row.
    pub fn covers(&self, kg: &Kg) -> Result<()> {
        let rows = self.entity_matrix(kg.side()).rows();
        if kg.num_entities() > rows {
            return Err(Error::MissingEmbedding {
                side: kg.side(),
                what: "entity",
                index: rows as u32,
            });
        }
        if let Some(m) = self.relation_matrix(kg.side()) {
            if kg.num_relations() > m.rows() {
                return Err(Error::MissingEmbedding {
                    side: kg.side(),
                    what: "relation",
                    index: m.rows() as u32,
                });
            }
        }
        Ok(())
    }

    /// Cosine similarity of a source and a target entity; 0 when either
    /// vector is zero.
    pub fn entity_similarity(&self, source: EntityId, target: EntityId) -> f64 {
        match (self.entity(Side::Source, source), self.entity(Side::Target, target)) {
            (Ok(u), Ok(v)) => cosine(u, v).unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

/// Relation vector for `r`: the model-native vector when the store has one
/// for this side, otherwise the mean translation `e_s - e_o` over the
/// triples of `r`.
pub fn derive_relation_embedding(store: &EmbeddingStore, kg: &Kg, r: RelationId) -> Result<Vec<f64>> {
    if let Some(m) = store.relation_matrix(kg.side()) {
        if r.index() < m.rows() {
            return Ok(m.row(r.index()).iter().map(|&x| x as f64).collect());
        }
    }
    let mut acc = vec![0.0f64; store.dim()];
    let mut count = 0usize;
    for t in kg.triples().iter().filter(|t| t.relation == r) {
        let s = store.entity(kg.side(), t.head)?;
        let o = store.entity(kg.side(), t.tail)?;
        for ((a, &x), &y) in acc.iter_mut().zip(s).zip(o) {
            *a += x as f64 - y as f64;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::UnknownRelation(r));
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    Ok(acc)
}

/// Relation vectors for every relation of one graph, computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationTable {
    side: Side,
    vectors: Vec<Option<Vec<f64>>>,
}

impl RelationTable {
    /// Model-native vectors if present, otherwise translation-derived ones.
    /// Relations without triples (and without native vectors) get no entry.
    pub fn from_model(store: &EmbeddingStore, kg: &Kg) -> Result<Self> {
        let side = kg.side();
        if let Some(m) = store.relation_matrix(side) {
            let vectors = kg
                .relations()
                .map(|r| {
                    (r.index() < m.rows()).then(|| m.row(r.index()).iter().map(|&x| x as f64).collect())
                })
                .collect();
            return Ok(RelationTable { side, vectors });
        }
        let dim = store.dim();
        let mut sums = vec![vec![0.0f64; dim]; kg.num_relations()];
        let mut counts = vec![0usize; kg.num_relations()];
        for t in kg.triples() {
            let s = store.entity(side, t.head)?;
            let o = store.entity(side, t.tail)?;
            let acc = &mut sums[t.relation.index()];
            for ((a, &x), &y) in acc.iter_mut().zip(s).zip(o) {
                *a += x as f64 - y as f64;
            }
            counts[t.relation.index()] += 1;
        }
        let vectors = sums
            .into_iter()
            .zip(counts)
            .map(|(mut v, n)| {
                (n > 0).then(|| {
                    v.iter_mut().for_each(|a| *a /= n as f64);
                    v
                })
            })
            .collect();
        Ok(RelationTable { side, vectors })
    }

    /// Relation-name encodings of one side.
    pub fn from_names(store: &EmbeddingStore, kg: &Kg) -> Result<Self> {
        let m = store.relation_name_matrix(kg.side()).ok_or(Error::NoRelationVectors)?;
        let vectors = kg
            .relations()
            .map(|r| (r.index() < m.rows()).then(|| m.row(r.index()).iter().map(|&x| x as f64).collect()))
            .collect();
        Ok(RelationTable { side: kg.side(), vectors })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn get(&self, r: RelationId) -> Option<&[f64]> {
        self.vectors.get(r.index()).and_then(|v| v.as_deref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (RelationId, &[f64])> {
        self.vectors
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_deref().map(|v| (RelationId(i as u32), v)))
    }
}

/// How relation vectors enter a path representation.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    /// Plain sum of relation vectors regardless of traversal direction.
    #[default]
    Unsigned,
    /// Incoming steps contribute the negated relation vector.
    Signed,
}

impl std::str::FromStr for PathMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsigned" => Ok(PathMode::Unsigned),
            "signed" => Ok(PathMode::Signed),
            other => Err(Error::InvalidConfig(format!("unknown path mode `{other}`"))),
        }
    }
}

/// Path representation: mean of the center and the intermediate entities
/// (the endpoint is excluded), concatenated with the mean relation vector.
/// Output length is `2 * dim`.
pub fn path_embedding(
    store: &EmbeddingStore,
    relations: &RelationTable,
    path: &RelationPath,
    mode: PathMode,
) -> Result<Vec<f64>> {
    let side = relations.side();
    let dim = store.dim();
    let n = path.len();
    if n == 0 {
        return Err(Error::Invariant("path embedding of an empty path".into()));
    }
    let mut out = vec![0.0f64; 2 * dim];
    let (ent, rel) = out.split_at_mut(dim);
    let center = store.entity(side, path.center)?;
    ent.iter_mut().zip(center).for_each(|(a, &x)| *a += x as f64);
    for step in &path.steps[..n - 1] {
        let v = store.entity(side, step.entity)?;
        ent.iter_mut().zip(v).for_each(|(a, &x)| *a += x as f64);
    }
    for step in &path.steps {
        let v = relations
            .get(step.relation)
            .ok_or(Error::MissingEmbedding { side, what: "relation", index: step.relation.0 })?;
        let sign = match (mode, step.direction) {
            (PathMode::Signed, Direction::Incoming) => -1.0,
            _ => 1.0,
        };
        rel.iter_mut().zip(v).for_each(|(a, &x)| *a += sign * x);
    }
    out.iter_mut().for_each(|a| *a /= n as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KgBuilder, Step};

    fn store2(src: &[[f32; 2]], tgt: &[[f32; 2]]) -> EmbeddingStore {
        EmbeddingStore::new(Matrix::from_rows(2, src).unwrap(), Matrix::from_rows(2, tgt).unwrap())
            .unwrap()
    }

    #[test]
    fn relation_embedding_single_triple() {
        let mut b = KgBuilder::new(Side::Source);
        b.fact("s", "r", "o");
        let kg = b.build();
        let store = store2(&[[1.0, 2.0], [0.5, -1.0]], &[[0.0, 0.0]]);
        let r = derive_relation_embedding(&store, &kg, RelationId(0)).unwrap();
        assert_eq!(r, vec![0.5, 3.0]);
    }

    #[test]
    fn relation_embedding_swapped_pairs_cancel() {
        let mut b = KgBuilder::new(Side::Source);
        b.fact("a", "r", "b").fact("b", "r", "a");
        let kg = b.build();
        let store = store2(&[[1.0, 2.0], [3.0, -1.0]], &[[0.0, 0.0]]);
        let r = derive_relation_embedding(&store, &kg, RelationId(0)).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn relation_embedding_three_triples() {
        // a=(1,0) b=(0,1) c=(2,2) d=(-1,3)
        // (a,r,b): (1,-1)  (c,r,d): (3,-1)  (b,r,c): (-2,-1)  mean: (2/3, -1)
        let mut b = KgBuilder::new(Side::Source);
        b.fact("a", "r", "b").fact("c", "r", "d").fact("b", "r", "c");
        let kg = b.build();
        let store = store2(&[[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [-1.0, 3.0]], &[[0.0, 0.0]]);
        let r = derive_relation_embedding(&store, &kg, RelationId(0)).unwrap();
        assert!((r[0] - 2.0 / 3.0).abs() < 1e-12 && (r[1] + 1.0).abs() < 1e-12);
        let table = RelationTable::from_model(&store, &kg).unwrap();
        assert_eq!(table.get(RelationId(0)).unwrap(), &r[..]);
    }

    #[test]
    fn native_relation_vectors_take_precedence() {
        let mut b = KgBuilder::new(Side::Source);
        b.fact("s", "r", "o");
        let kg = b.build();
        let store = store2(&[[1.0, 2.0], [0.5, -1.0]], &[[0.0, 0.0]])
            .with_relations(Side::Source, Matrix::from_rows(2, [[9.0, 9.0]]).unwrap())
            .unwrap();
        assert_eq!(derive_relation_embedding(&store, &kg, RelationId(0)).unwrap(), vec![9.0, 9.0]);
    }

    #[test]
    fn relation_without_triples() {
        let mut b = KgBuilder::new(Side::Source);
        b.entity("x");
        let r = b.relation("r");
        let kg = b.build();
        let store = store2(&[[1.0, 2.0]], &[[0.0, 0.0]]);
        assert!(matches!(derive_relation_embedding(&store, &kg, r), Err(Error::UnknownRelation(_))));
    }

    fn chain_fixture() -> (Kg, EmbeddingStore) {
        // e1 -r-> m <-s- x ; entity vectors e1=(1,0) m=(3,2) x=(5,5)
        let mut b = KgBuilder::new(Side::Source);
        b.fact("e1", "r", "m").fact("x", "s", "m");
        let kg = b.build();
        let store = store2(&[[1.0, 0.0], [3.0, 2.0], [5.0, 5.0]], &[[0.0, 0.0]])
            .with_relations(Side::Source, Matrix::from_rows(2, [[1.0, 1.0], [0.0, 2.0]]).unwrap())
            .unwrap();
        (kg, store)
    }

    fn path(kg: &Kg, center: &str, steps: &[(Direction, &str, &str)]) -> RelationPath {
        RelationPath {
            center: kg.entity_by_label(center).unwrap(),
            steps: steps
                .iter()
                .map(|&(d, r, e)| Step {
                    direction: d,
                    relation: kg.relation_by_label(r).unwrap(),
                    entity: kg.entity_by_label(e).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn path_embedding_length_one_is_concat() {
        let (kg, store) = chain_fixture();
        let rel = RelationTable::from_model(&store, &kg).unwrap();
        let p = path(&kg, "e1", &[(Direction::Outgoing, "r", "m")]);
        let v = path_embedding(&store, &rel, &p, PathMode::Unsigned).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn path_embedding_length_two_by_hand() {
        let (kg, store) = chain_fixture();
        let rel = RelationTable::from_model(&store, &kg).unwrap();
        let p = path(&kg, "e1", &[(Direction::Outgoing, "r", "m"), (Direction::Incoming, "s", "x")]);
        // entity half: (e1 + m)/2 = (2, 1); relation half: (r + s)/2 = (0.5, 1.5)
        let v = path_embedding(&store, &rel, &p, PathMode::Unsigned).unwrap();
        assert_eq!(v, vec![2.0, 1.0, 0.5, 1.5]);
        // signed: (r - s)/2 = (0.5, -0.5)
        let v = path_embedding(&store, &rel, &p, PathMode::Signed).unwrap();
        assert_eq!(v, vec![2.0, 1.0, 0.5, -0.5]);
    }

    #[test]
    fn path_embedding_zero_relations() {
        let (kg, store) = chain_fixture();
        let store = store
            .with_relations(Side::Source, Matrix::zeros(2, 2))
            .unwrap();
        let rel = RelationTable::from_model(&store, &kg).unwrap();
        let p = path(&kg, "e1", &[(Direction::Outgoing, "r", "m"), (Direction::Incoming, "s", "x")]);
        let v = path_embedding(&store, &rel, &p, PathMode::Unsigned).unwrap();
        assert_eq!(v, vec![2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn non_finite_rejected() {
        let bad = Matrix::from_rows(2, [[1.0, f32::NAN]]).unwrap();
        assert!(matches!(
            EmbeddingStore::new(bad, Matrix::zeros(1, 2)),
            Err(Error::NonFinite { side: Side::Source, row: 0 })
        ));
        assert!(matches!(
            EmbeddingStore::new(Matrix::zeros(1, 2), Matrix::zeros(1, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
