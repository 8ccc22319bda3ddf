//! CSV formats: page accesses (`index,page,op`) and the delta vocabulary
//! (`delta,count`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{DeltaVocabulary, MemoryAccess, Op, PageId, TraceError};

#[derive(Serialize, Deserialize)]
struct AccessRow {
    index: u64,
    page: u64,
    op: String,
}

pub fn write_accesses<W: Write>(out: W, accesses: &[MemoryAccess]) -> Result<(), TraceError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["index", "page", "op"])?;
    for a in accesses {
        w.serialize(AccessRow {
            index: a.index,
            page: a.page.0,
            op: a.op.as_str().to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a page-access CSV. The header line is mandatory.
pub fn read_accesses<R: Read>(input: R) -> Result<Vec<MemoryAccess>, TraceError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "page", "op"] {
        return Err(TraceError::Format(format!(
            "expected header index,page,op, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: AccessRow = row?;
        let op = Op::parse(&row.op)
            .ok_or_else(|| TraceError::Format(format!("unknown op {:?} at index {}", row.op, row.index)))?;
        out.push(MemoryAccess {
            page: PageId(row.page),
            op,
            index: row.index,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct VocabRow {
    delta: i64,
    count: u64,
}

/// Writes `delta,count` rows by descending count, ties by ascending delta.
pub fn write_vocabulary<W: Write>(out: W, vocab: &DeltaVocabulary) -> Result<(), TraceError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["delta", "count"])?;
    for (delta, count) in vocab.ranked() {
        w.serialize(VocabRow { delta, count })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a vocabulary file. The file does not record the threshold it was
/// built with, so the smallest stored count is taken as `min_count`.
pub fn read_vocabulary<R: Read>(input: R) -> Result<DeltaVocabulary, TraceError> {
    let mut r = csv::Reader::from_reader(input);
    let mut pairs = Vec::new();
    for row in r.deserialize() {
        let row: VocabRow = row?;
        pairs.push((row.delta, row.count));
    }
    let min_count = pairs.iter().map(|p| p.1).min().unwrap_or(1).max(1);
    DeltaVocabulary::from_counts(pairs, min_count)
}
