//! Memory traces: page-level request streams, page-delta tokens, the delta
//! vocabulary and the train/test split.
//!
//! A trace starts life as a sequence of [`RawTraceRecord`]s parsed from a Pin
//! log (see [`pin`]) or produced by a [`synthetic`] generator. Only the data
//! address (`MEM`) feeds the simulated request stream; it is mapped to a page
//! id by floor division with the page size.

pub mod io;
pub mod pin;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use pin::{parse_pin_trace, ParseMode, ParseOptions, PinParse, RawTraceRecord};
pub use synthetic::{generate_synthetic, Workload};

/// Logical page number (byte address divided by the page size).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PageId(pub u64);

impl PageId {
    /// Applies a signed page delta, returning `None` if the result leaves `[0, universe)`.
    #[inline]
    pub fn offset(self, delta: i64, universe: u64) -> Option<PageId> {
        let next = i128::from(self.0) + i128::from(delta);
        if next < 0 || next >= i128::from(universe) {
            None
        } else {
            Some(PageId(next as u64))
        }
    }

    /// Signed difference `self - earlier`.
    #[inline]
    pub fn delta_from(self, earlier: PageId) -> i64 {
        self.0.wrapping_sub(earlier.0) as i64
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Memory operation kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Op {
    #[default]
    Read,
    Write,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Read => "R",
            Op::Write => "W",
        }
    }

    pub fn parse(s: &str) -> Option<Op> {
        match s {
            "R" | "r" => Some(Op::Read),
            "W" | "w" => Some(Op::Write),
            _ => None,
        }
    }

    pub fn is_write(self) -> bool {
        self == Op::Write
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One page-level request `y_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemoryAccess {
    pub page: PageId,
    pub op: Op,
    /// 0-based position of the request in its sequence.
    pub index: u64,
}

impl MemoryAccess {
    pub fn new(index: u64, page: u64, op: Op) -> Self {
        Self {
            page: PageId(page),
            op,
            index,
        }
    }
}

/// Builds a read-only access sequence from bare page numbers.
pub fn accesses_from_pages(pages: &[u64]) -> Vec<MemoryAccess> {
    pages
        .iter()
        .enumerate()
        .map(|(i, &p)| MemoryAccess::new(i as u64, p, Op::Read))
        .collect()
}

/// Page numbers of an access sequence.
pub fn page_numbers(accesses: &[MemoryAccess]) -> Vec<u64> {
    accesses.iter().map(|a| a.page.0).collect()
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("page size {0} is not a power of two")]
    PageSize(u64),
    #[error("cannot strip {strip} leading accesses from a trace of length {len}")]
    PreambleTooLong { strip: usize, len: usize },
    #[error("automatic preamble detection needs at least two traces, got {0}")]
    NotEnoughTraces(usize),
    #[error("need at least {needed} accesses, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("train fraction {0} is outside (0, 1)")]
    Fraction(f64),
    #[error("split of {len} accesses at fraction {fraction} leaves an empty side")]
    DegenerateSplit { len: usize, fraction: f64 },
    #[error("min_count must be at least 1")]
    MinCount,
    #[error("invalid workload parameters: {0}")]
    Workload(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Maps byte-level records to page requests (`page = mem / page_size`).
///
/// The `PC` and `MEM_PREF` columns are not turned into requests.
pub fn to_page_accesses(
    records: &[RawTraceRecord],
    page_size: u64,
) -> Result<Vec<MemoryAccess>, TraceError> {
    if !page_size.is_power_of_two() {
        return Err(TraceError::PageSize(page_size));
    }
    let shift = page_size.trailing_zeros();
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| MemoryAccess::new(i as u64, r.mem >> shift, r.op))
        .collect())
}

/// How the leading preamble of a trace is removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PreambleMode {
    /// Drop exactly this many leading accesses.
    Explicit(usize),
    /// Drop the longest common prefix of page ids shared by all supplied traces.
    AutoLcp,
}

impl Default for PreambleMode {
    fn default() -> Self {
        PreambleMode::Explicit(0)
    }
}

fn renumber(accesses: &[MemoryAccess]) -> Vec<MemoryAccess> {
    accesses
        .iter()
        .enumerate()
        .map(|(i, a)| MemoryAccess {
            index: i as u64,
            ..*a
        })
        .collect()
}

/// Drops the first `n` accesses and renumbers the rest from 0.
pub fn strip_preamble(accesses: &[MemoryAccess], n: usize) -> Result<Vec<MemoryAccess>, TraceError> {
    if n == 0 {
        return Ok(accesses.to_vec());
    }
    if n >= accesses.len() {
        return Err(TraceError::PreambleTooLong {
            strip: n,
            len: accesses.len(),
        });
    }
    Ok(renumber(&accesses[n..]))
}

/// Length of the longest common prefix of page ids across all traces.
pub fn common_prefix_len(traces: &[Vec<MemoryAccess>]) -> usize {
    let Some(first) = traces.first() else {
        return 0;
    };
    let mut len = first.len();
    for other in &traces[1..] {
        len = len.min(
            first
                .iter()
                .zip(other)
                .take_while(|(a, b)| a.page == b.page)
                .count(),
        );
    }
    len
}

/// Removes the shared page-id prefix from every trace.
pub fn strip_common_preamble(
    traces: &[Vec<MemoryAccess>],
) -> Result<Vec<Vec<MemoryAccess>>, TraceError> {
    if traces.len() < 2 {
        return Err(TraceError::NotEnoughTraces(traces.len()));
    }
    let lcp = common_prefix_len(traces);
    Ok(traces.iter().map(|t| renumber(&t[lcp..])).collect())
}

/// A page-delta token: a signed page difference or the out-of-vocabulary marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeltaToken {
    Delta(i64),
    Unk,
}

impl DeltaToken {
    pub fn value(self) -> Option<i64> {
        match self {
            DeltaToken::Delta(d) => Some(d),
            DeltaToken::Unk => None,
        }
    }
}

impl fmt::Display for DeltaToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaToken::Delta(d) => write!(f, "{d}"),
            DeltaToken::Unk => f.write_str("UNK"),
        }
    }
}

/// Which page a delta is measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeltaMode {
    /// `δ_j = y_j − y_{j−1}`.
    #[default]
    Consecutive,
    /// `δ_j = y_j − y_0`, every delta measured from the first page.
    Anchored,
}

/// Raw signed deltas of a page sequence.
pub fn raw_deltas(accesses: &[MemoryAccess], mode: DeltaMode) -> Vec<i64> {
    match mode {
        DeltaMode::Consecutive => accesses
            .windows(2)
            .map(|w| w[1].page.delta_from(w[0].page))
            .collect(),
        DeltaMode::Anchored => {
            let Some(anchor) = accesses.first() else {
                return Vec::new();
            };
            accesses[1..]
                .iter()
                .map(|a| a.page.delta_from(anchor.page))
                .collect()
        }
    }
}

/// Encodes a page sequence as `len − 1` delta tokens; deltas missing from
/// `vocab` become [`DeltaToken::Unk`].
pub fn encode_deltas(
    accesses: &[MemoryAccess],
    vocab: Option<&DeltaVocabulary>,
    mode: DeltaMode,
) -> Result<Vec<DeltaToken>, TraceError> {
    if accesses.len() < 2 {
        return Err(TraceError::TooShort {
            needed: 2,
            got: accesses.len(),
        });
    }
    Ok(raw_deltas(accesses, mode)
        .into_iter()
        .map(|d| match vocab {
            Some(v) => v.encode(d),
            None => DeltaToken::Delta(d),
        })
        .collect())
}

/// The quantized delta alphabet: deltas seen at least `min_count` times in training.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeltaVocabulary {
    counts: BTreeMap<i64, u64>,
    min_count: u64,
}

impl DeltaVocabulary {
    pub const DEFAULT_MIN_COUNT: u64 = 2;

    pub fn build(train_deltas: &[i64], min_count: u64) -> Result<Self, TraceError> {
        if min_count == 0 {
            return Err(TraceError::MinCount);
        }
        let mut counts = BTreeMap::new();
        for &d in train_deltas {
            *counts.entry(d).or_insert(0u64) += 1;
        }
        counts.retain(|_, c| *c >= min_count);
        Ok(Self { counts, min_count })
    }

    /// Rebuilds a vocabulary from stored `(delta, count)` pairs.
    pub fn from_counts(
        pairs: impl IntoIterator<Item = (i64, u64)>,
        min_count: u64,
    ) -> Result<Self, TraceError> {
        if min_count == 0 {
            return Err(TraceError::MinCount);
        }
        let mut counts = BTreeMap::new();
        for (d, c) in pairs {
            if c < min_count {
                return Err(TraceError::Format(format!(
                    "delta {d} has count {c} below min_count {min_count}"
                )));
            }
            if counts.insert(d, c).is_some() {
                return Err(TraceError::Format(format!("duplicate delta {d}")));
            }
        }
        Ok(Self { counts, min_count })
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn contains(&self, delta: i64) -> bool {
        self.counts.contains_key(&delta)
    }

    pub fn count(&self, delta: i64) -> Option<u64> {
        self.counts.get(&delta).copied()
    }

    /// Tokens in ascending order.
    pub fn tokens(&self) -> impl Iterator<Item = i64> + '_ {
        self.counts.keys().copied()
    }

    pub fn encode(&self, delta: i64) -> DeltaToken {
        if self.contains(delta) {
            DeltaToken::Delta(delta)
        } else {
            DeltaToken::Unk
        }
    }

    /// Entries by descending count, ties by ascending delta (the file order).
    pub fn ranked(&self) -> Vec<(i64, u64)> {
        let mut rows: Vec<(i64, u64)> = self.counts.iter().map(|(&d, &c)| (d, c)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        rows
    }
}

/// A trace split into a training prefix and a test suffix, with the delta
/// vocabulary built from the training prefix only.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceDataset {
    accesses: Vec<MemoryAccess>,
    train_end: usize,
    vocabulary: DeltaVocabulary,
}

impl TraceDataset {
    pub fn accesses(&self) -> &[MemoryAccess] {
        &self.accesses
    }

    pub fn train_end(&self) -> usize {
        self.train_end
    }

    pub fn train(&self) -> &[MemoryAccess] {
        &self.accesses[..self.train_end]
    }

    pub fn test(&self) -> &[MemoryAccess] {
        &self.accesses[self.train_end..]
    }

    pub fn vocabulary(&self) -> &DeltaVocabulary {
        &self.vocabulary
    }
}

/// Splits at `floor(train_fraction × len)` and builds the vocabulary from the
/// training deltas.
pub fn split_train_test(
    accesses: Vec<MemoryAccess>,
    train_fraction: f64,
    min_count: u64,
) -> Result<TraceDataset, TraceError> {
    if train_fraction.is_nan() || train_fraction <= 0.0 || train_fraction >= 1.0 {
        return Err(TraceError::Fraction(train_fraction));
    }
    let len = accesses.len();
    if len < 10 {
        return Err(TraceError::TooShort { needed: 10, got: len });
    }
    let train_end = (train_fraction * len as f64).floor() as usize;
    if train_end == 0 || train_end >= len {
        return Err(TraceError::DegenerateSplit {
            len,
            fraction: train_fraction,
        });
    }
    let train_deltas = raw_deltas(&accesses[..train_end], DeltaMode::Consecutive);
    let vocabulary = DeltaVocabulary::build(&train_deltas, min_count)?;
    Ok(TraceDataset {
        accesses,
        train_end,
        vocabulary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(mem: u64) -> RawTraceRecord {
        RawTraceRecord {
            pc: 0,
            op: Op::Read,
            mem,
            n_bytes: 8,
            mem_pref: None,
        }
    }

    #[test]
    fn page_mapping() {
        let acc = to_page_accesses(&[rec(0x7f89388d9ea0), rec(0), rec(8191)], 4096).unwrap();
        assert_eq!(acc[0].page, PageId(0x7f89388d9));
        assert_eq!(acc[1].page, PageId(0));
        assert_eq!(acc[2].page, PageId(1));
        assert_eq!(acc[2].index, 2);
        assert!(matches!(
            to_page_accesses(&[rec(1)], 3000),
            Err(TraceError::PageSize(3000))
        ));
    }

    #[test]
    fn explicit_preamble() {
        let acc = accesses_from_pages(&[5, 5, 7, 9]);
        let out = strip_preamble(&acc, 2).unwrap();
        assert_eq!(page_numbers(&out), vec![7, 9]);
        assert_eq!(out[0].index, 0);
        assert!(strip_preamble(&acc, 4).is_err());
        assert_eq!(strip_preamble(&acc, 0).unwrap(), acc);
    }

    #[test]
    fn auto_preamble() {
        let traces = vec![
            accesses_from_pages(&[1, 2, 3, 9]),
            accesses_from_pages(&[1, 2, 4, 9]),
        ];
        let out = strip_common_preamble(&traces).unwrap();
        assert_eq!(page_numbers(&out[0]), vec![3, 9]);
        assert_eq!(page_numbers(&out[1]), vec![4, 9]);
        assert!(matches!(
            strip_common_preamble(&traces[..1]),
            Err(TraceError::NotEnoughTraces(1))
        ));
    }

    #[test]
    fn consecutive_deltas() {
        let acc = accesses_from_pages(&[73, 81, 67, 67, 75]);
        let toks = encode_deltas(&acc, None, DeltaMode::Consecutive).unwrap();
        let vals: Vec<i64> = toks.iter().map(|t| t.value().unwrap()).collect();
        assert_eq!(vals, vec![8, -14, 0, 8]);

        let same = encode_deltas(&accesses_from_pages(&[5, 5]), None, DeltaMode::Consecutive).unwrap();
        assert_eq!(same, vec![DeltaToken::Delta(0)]);

        assert!(encode_deltas(&accesses_from_pages(&[5]), None, DeltaMode::Consecutive).is_err());
    }

    #[test]
    fn anchored_deltas() {
        let acc = accesses_from_pages(&[73, 81, 67, 67, 75]);
        assert_eq!(raw_deltas(&acc, DeltaMode::Anchored), vec![8, -6, -6, 2]);
    }

    #[test]
    fn oov_deltas_become_unk() {
        let vocab = DeltaVocabulary::build(&[0, 0, 8, 8], 2).unwrap();
        let toks = encode_deltas(&accesses_from_pages(&[3, 10]), Some(&vocab), DeltaMode::Consecutive)
            .unwrap();
        assert_eq!(toks, vec![DeltaToken::Unk]);
    }

    #[test]
    fn vocabulary_thresholds() {
        let v = DeltaVocabulary::build(&[8, 8, -14, 0, 0, 3], 2).unwrap();
        assert_eq!(v.tokens().collect::<Vec<_>>(), vec![0, 8]);
        assert_eq!(v.count(8), Some(2));
        assert_eq!(v.count(0), Some(2));
        assert_eq!(v.count(3), None);

        let all = DeltaVocabulary::build(&[8, 8, -14, 0, 0, 3], 1).unwrap();
        assert_eq!(all.len(), 4);

        let none = DeltaVocabulary::build(&[1, 2, 3], 2).unwrap();
        assert!(none.is_empty());
        assert!(DeltaVocabulary::build(&[], 2).unwrap().is_empty());
        assert!(matches!(DeltaVocabulary::build(&[1], 0), Err(TraceError::MinCount)));
    }

    #[test]
    fn ranked_order() {
        let v = DeltaVocabulary::build(&[5, 5, -1, -1, 2, 2, 2], 1).unwrap();
        assert_eq!(v.ranked(), vec![(2, 3), (-1, 2), (5, 2)]);
    }

    #[test]
    fn split_points() {
        let ds = split_train_test(accesses_from_pages(&(0..100).collect::<Vec<_>>()), 0.9, 2).unwrap();
        assert_eq!(ds.train_end(), 90);
        assert_eq!(ds.test().len(), 10);

        let ds = split_train_test(accesses_from_pages(&(0..10).collect::<Vec<_>>()), 0.5, 2).unwrap();
        assert_eq!(ds.train_end(), 5);

        let ds = split_train_test(accesses_from_pages(&(0..100).collect::<Vec<_>>()), 0.999, 2).unwrap();
        assert_eq!(ds.train_end(), 99);
        assert_eq!(ds.test().len(), 1);

        assert!(split_train_test(accesses_from_pages(&[1; 9]), 0.5, 2).is_err());
        assert!(split_train_test(accesses_from_pages(&[1; 10]), 0.01, 2).is_err());
        assert!(split_train_test(accesses_from_pages(&[1; 10]), 1.0, 2).is_err());
    }

    #[test]
    fn split_vocabulary_uses_train_only() {
        // train deltas are all +1; the test part jumps by 50
        let mut pages: Vec<u64> = (0..18).collect();
        pages.extend([68, 118]);
        let ds = split_train_test(accesses_from_pages(&pages), 0.9, 2).unwrap();
        assert_eq!(ds.vocabulary().tokens().collect::<Vec<_>>(), vec![1]);
    }
}
