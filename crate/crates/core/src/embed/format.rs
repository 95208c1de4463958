//! On-disk embedding formats.
//!
//! Text: a sequence of blocks, each introduced by a header line
//! `exea-emb v1 <kind> <count> <dim>` followed by `count` lines of
//! `<id>\t<dim space-separated reals>`. `<kind>` is one of `source`,
//! `target` (entity vectors keyed by entity id), `source-relation`,
//! `target-relation` (model relation vectors keyed by relation id) or
//! `source-name`, `target-name` (relation-name encodings).
//!
//! Binary: magic `EXEAEMB1`, then blocks of `kind: u8`, `count: u32`,
//! `dim: u32` and `count` rows of `id: u64` followed by `dim` `f32`s, all
//! little-endian. Kind codes follow the order listed above.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EmbeddingStore, Matrix};
use crate::error::{Error, Result};
use crate::kg::{Kg, Side};

const MAGIC: &[u8; 8] = b"EXEAEMB1";
const HEADER: &str = "exea-emb";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Entity(Side),
    Relation(Side),
    RelationName(Side),
}

impl BlockKind {
    const ALL: [BlockKind; 6] = [
        BlockKind::Entity(Side::Source),
        BlockKind::Entity(Side::Target),
        BlockKind::Relation(Side::Source),
        BlockKind::Relation(Side::Target),
        BlockKind::RelationName(Side::Source),
        BlockKind::RelationName(Side::Target),
    ];

    fn token(self) -> String {
        match self {
            BlockKind::Entity(s) => s.to_string(),
            BlockKind::Relation(s) => format!("{s}-relation"),
            BlockKind::RelationName(s) => format!("{s}-name"),
        }
    }

    fn parse(token: &str) -> Option<Self> {
        BlockKind::ALL.into_iter().find(|k| k.token() == token)
    }

    fn code(self) -> u8 {
        BlockKind::ALL.iter().position(|&k| k == self).unwrap() as u8
    }
}

struct Block {
    kind: BlockKind,
    dim: usize,
    rows: Vec<(u64, Vec<f32>)>,
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::EmbeddingFormat { path: path.into(), message: message.into() }
}

fn parse_text(path: &Path, text: &str) -> Result<Vec<Block>> {
    let mut blocks = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    while let Some((no, line)) = lines.next() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != HEADER || fields[1] != "v1" {
            return Err(format_err(path, format!("line {}: expected block header", no + 1)));
        }
        let kind = BlockKind::parse(fields[2])
            .ok_or_else(|| format_err(path, format!("line {}: unknown block kind {}", no + 1, fields[2])))?;
        let count: usize =
            fields[3].parse().map_err(|_| format_err(path, format!("line {}: bad count", no + 1)))?;
        let dim: usize =
            fields[4].parse().map_err(|_| format_err(path, format!("line {}: bad dim", no + 1)))?;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, line) = lines
                .next()
                .ok_or_else(|| format_err(path, format!("block {} truncated", kind.token())))?;
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| format_err(path, format!("line {}: missing tab", no + 1)))?;
            let id: u64 =
                id.trim().parse().map_err(|_| format_err(path, format!("line {}: bad id", no + 1)))?;
            let values = values
                .split_whitespace()
                .map(str::parse::<f32>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| format_err(path, format!("line {}: bad value", no + 1)))?;
            if values.len() != dim {
                return Err(format_err(
                    path,
                    format!("line {}: expected {dim} values, got {}", no + 1, values.len()),
                ));
            }
            rows.push((id, values));
        }
        blocks.push(Block { kind, dim, rows });
    }
    Ok(blocks)
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<Vec<Block>> {
    let mut pos = MAGIC.len();
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| format_err(path, "truncated binary file"))?;
        pos += n;
        Ok(s)
    };
    let mut blocks = Vec::new();
    loop {
        let Ok(code) = take(1) else { break };
        let kind = *BlockKind::ALL
            .get(code[0] as usize)
            .ok_or_else(|| format_err(path, format!("unknown block code {}", code[0])))?;
        let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let id = u64::from_le_bytes(take(8)?.try_into().unwrap());
            let raw = take(4 * dim)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            rows.push((id, values));
        }
        blocks.push(Block { kind, dim, rows });
    }
    Ok(blocks)
}

fn read_blocks(path: &Path) -> Result<Vec<Block>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        parse_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| format_err(path, "not UTF-8 text"))?;
        parse_text(path, &text)
    }
}

fn assemble(path: &Path, block: &Block, kg: &Kg, relations: bool) -> Result<Matrix> {
    let (n, what) = if relations {
        (kg.num_relations(), "relation")
    } else {
        (kg.num_entities(), "entity")
    };
    let mut slots: Vec<Option<&[f32]>> = vec![None; n];
    for (id, values) in &block.rows {
        let dense = if relations {
            kg.relation_by_external_id(*id).map(|r| r.index())
        } else {
            kg.entity_by_external_id(*id).map(|e| e.index())
        }
        .ok_or_else(|| format_err(path, format!("unknown {what} id {id} in {} block", block.kind.token())))?;
        if slots[dense].replace(values).is_some() {
            return Err(format_err(path, format!("duplicate {what} id {id}")));
        }
    }
    let mut m = Matrix::zeros(n, block.dim);
    for (i, slot) in slots.into_iter().enumerate() {
        let row = slot.ok_or(Error::MissingEmbedding { side: kg.side(), what, index: i as u32 })?;
        m.row_mut(i).copy_from_slice(row);
    }
    Ok(m)
}

/// Reads a text or binary embedding file, mapping external ids through the
/// two graphs. Both entity blocks are required; relation and name blocks
/// are attached when present.
pub fn read_embedding_file(path: impl AsRef<Path>, kg1: &Kg, kg2: &Kg) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let blocks = read_blocks(path)?;
    let by_kind: HashMap<BlockKind, &Block> = blocks.iter().map(|b| (b.kind, b)).collect();
    let kg_of = |side: Side| if side == kg1.side() { kg1 } else { kg2 };
    let entity = |side| {
        by_kind
            .get(&BlockKind::Entity(side))
            .ok_or_else(|| format_err(path, format!("missing {side} entity block")))
            .and_then(|b| assemble(path, b, kg_of(side), false))
    };
    let mut store = EmbeddingStore::new(entity(Side::Source)?, entity(Side::Target)?)?;
    for side in [Side::Source, Side::Target] {
        if let Some(b) = by_kind.get(&BlockKind::Relation(side)) {
            store = store.with_relations(side, assemble(path, b, kg_of(side), true)?)?;
        }
        if let Some(b) = by_kind.get(&BlockKind::RelationName(side)) {
            store = store.with_relation_names(side, assemble(path, b, kg_of(side), true)?)?;
        }
    }
    Ok(store)
}

/// Attaches relation-name encodings read from a separate file.
pub fn attach_relation_names(
    store: EmbeddingStore,
    path: impl AsRef<Path>,
    kg1: &Kg,
    kg2: &Kg,
) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let mut store = store;
    let blocks = read_blocks(path)?;
    for b in &blocks {
        if let BlockKind::RelationName(side) = b.kind {
            let kg = if side == kg1.side() { kg1 } else { kg2 };
            store = store.with_relation_names(side, assemble(path, b, kg, true)?)?;
        }
    }
    Ok(store)
}

fn blocks_of<'a>(store: &'a EmbeddingStore, kg1: &'a Kg, kg2: &'a Kg) -> Vec<(BlockKind, &'a Matrix, &'a Kg)> {
    let mut out = Vec::new();
    for kg in [kg1, kg2] {
        out.push((BlockKind::Entity(kg.side()), store.entity_matrix(kg.side()), kg));
    }
    for kg in [kg1, kg2] {
        if let Some(m) = store.relation_matrix(kg.side()) {
            out.push((BlockKind::Relation(kg.side()), m, kg));
        }
    }
    for kg in [kg1, kg2] {
        if let Some(m) = store.relation_name_matrix(kg.side()) {
            out.push((BlockKind::RelationName(kg.side()), m, kg));
        }
    }
    out
}

fn external_id(kind: BlockKind, kg: &Kg, row: usize) -> u64 {
    match kind {
        BlockKind::Entity(_) => kg.entity_external_id(crate::kg::EntityId(row as u32)),
        _ => kg.relation_external_id(crate::kg::RelationId(row as u32)),
    }
}

fn row_count(kind: BlockKind, kg: &Kg, m: &Matrix) -> usize {
    match kind {
        BlockKind::Entity(_) => kg.num_entities().min(m.rows()),
        _ => kg.num_relations().min(m.rows()),
    }
}

pub fn write_embedding_text(store: &EmbeddingStore, kg1: &Kg, kg2: &Kg) -> String {
    let mut out = String::new();
    for (kind, m, kg) in blocks_of(store, kg1, kg2) {
        let n = row_count(kind, kg, m);
        let _ = writeln!(out, "{HEADER} v1 {} {} {}", kind.token(), n, m.dim());
        for i in 0..n {
            let _ = write!(out, "{}\t", external_id(kind, kg, i));
            for (j, v) in m.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_embedding_binary(store: &EmbeddingStore, kg1: &Kg, kg2: &Kg) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for (kind, m, kg) in blocks_of(store, kg1, kg2) {
        let n = row_count(kind, kg, m);
        out.push(kind.code());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
        for i in 0..n {
            out.extend_from_slice(&external_id(kind, kg, i).to_le_bytes());
            for v in m.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KgBuilder;

    fn kgs() -> (Kg, Kg) {
        let mut a = KgBuilder::with_offsets(Side::Source, 10, 0);
        a.fact("a", "r", "b");
        let mut b = KgBuilder::with_offsets(Side::Target, 20, 5);
        b.fact("x", "q", "y");
        (a.build(), b.build())
    }

    fn sample_store() -> EmbeddingStore {
        EmbeddingStore::new(
            Matrix::from_rows(3, [[0.1, -2.5, 3.0e-8], [1.0, 0.0, 0.333_333_34]]).unwrap(),
            Matrix::from_rows(3, [[7.0, 8.0, 9.0], [-1.0, -1.0, -1.0]]).unwrap(),
        )
        .unwrap()
        .with_relations(Side::Source, Matrix::from_rows(3, [[0.5, 0.5, 0.5]]).unwrap())
        .unwrap()
    }

    #[test]
    fn text_and_binary_round_trip() {
        let (kg1, kg2) = kgs();
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("e.tsv");
        fs::write(&text, write_embedding_text(&store, &kg1, &kg2)).unwrap();
        assert_eq!(read_embedding_file(&text, &kg1, &kg2).unwrap(), store);
        let bin = dir.path().join("e.bin");
        fs::write(&bin, write_embedding_binary(&store, &kg1, &kg2)).unwrap();
        assert_eq!(read_embedding_file(&bin, &kg1, &kg2).unwrap(), store);
    }

    #[test]
    fn header_format() {
        let (kg1, kg2) = kgs();
        let text = write_embedding_text(&sample_store(), &kg1, &kg2);
        assert!(text.starts_with("exea-emb v1 source 2 3\n10\t0.1 -2.5 0.00000003\n"));
        assert!(text.contains("exea-emb v1 source-relation 1 3\n0\t0.5 0.5 0.5\n"));
    }

    #[test]
    fn missing_row_and_unknown_id() {
        let (kg1, kg2) = kgs();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tsv");
        fs::write(&p, "exea-emb v1 source 1 1\n10\t1\nexea-emb v1 target 2 1\n20\t1\n21\t2\n").unwrap();
        assert!(matches!(
            read_embedding_file(&p, &kg1, &kg2),
            Err(Error::MissingEmbedding { side: Side::Source, index: 1, .. })
        ));
        fs::write(&p, "exea-emb v1 source 1 1\n99\t1\n").unwrap();
        assert!(matches!(read_embedding_file(&p, &kg1, &kg2), Err(Error::EmbeddingFormat { .. })));
    }
}
