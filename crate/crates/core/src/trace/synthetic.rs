//! Seeded synthetic page-request workloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Zipf};

use super::{MemoryAccess, Op, PageId, TraceError};

/// Workload shapes. Every generator is deterministic for a fixed seed.
#[derive(Clone, Debug, PartialEq)]
pub enum Workload {
    /// Pages `0, 1, …, universe−1, 0, 1, …`.
    CyclicScan { universe: u64 },
    /// With probability `hot_prob` a uniformly drawn page from the hot set
    /// `[0, hot_pages)`; otherwise the next page of a cyclic scan over
    /// `[hot_pages, hot_pages + loop_pages)`.
    LoopingHotset {
        loop_pages: u64,
        hot_pages: u64,
        hot_prob: f64,
    },
    /// Independent draws with `P(page = r−1) ∝ r^−exponent`, `r ∈ 1..=universe`.
    Zipfian { universe: u64, exponent: f64 },
    /// Page deltas drawn from a first-order Markov chain over `deltas`.
    /// Row `i` of `transitions` holds the weights of the next delta given that
    /// the previous one was `deltas[i]`; the first delta uses row 0. Pages wrap
    /// modulo `universe`.
    MarkovDelta {
        universe: u64,
        start: u64,
        deltas: Vec<i64>,
        transitions: Vec<Vec<f64>>,
    },
    /// Sequential scans of fixed-size objects whose popularity is Zipf
    /// distributed, interleaved with bursts of uniform accesses to a small
    /// hot set.
    ///
    /// Object `o` covers pages `hot_pages + o·object_pages ..` (contiguous).
    /// Each burst is, with probability `hot_fraction`, `hot_burst` hot-page
    /// accesses; otherwise a full scan of a Zipf-chosen object. Hot accesses
    /// are uniform draws, or with `hot_sweep` the continuation of a cyclic
    /// sweep over the hot set.
    ZipfianHotset {
        objects: u64,
        object_pages: u64,
        exponent: f64,
        hot_pages: u64,
        hot_fraction: f64,
        hot_burst: u64,
        hot_sweep: bool,
    },
}

impl Workload {
    /// Markov-delta workload whose deltas are drawn i.i.d. with `weights`.
    pub fn iid_deltas(universe: u64, start: u64, deltas: Vec<i64>, weights: Vec<f64>) -> Self {
        let transitions = vec![weights; deltas.len()];
        Workload::MarkovDelta {
            universe,
            start,
            deltas,
            transitions,
        }
    }

    fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Workload(m.to_string()));
        match self {
            Workload::CyclicScan { universe } if *universe == 0 => bad("universe must be at least 1"),
            Workload::LoopingHotset {
                loop_pages,
                hot_pages,
                hot_prob,
            } => {
                if !(0.0..=1.0).contains(hot_prob) {
                    bad("hot_prob must lie in [0, 1]")
                } else if *loop_pages == 0 && *hot_prob < 1.0 {
                    bad("loop_pages must be at least 1")
                } else if *hot_pages == 0 && *hot_prob > 0.0 {
                    bad("hot_pages must be at least 1")
                } else {
                    Ok(())
                }
            }
            Workload::Zipfian { universe, exponent } => {
                if *universe == 0 {
                    bad("universe must be at least 1")
                } else if exponent.is_nan() || *exponent < 0.0 {
                    bad("exponent must be non-negative")
                } else {
                    Ok(())
                }
            }
            Workload::MarkovDelta {
                universe,
                start,
                deltas,
                transitions,
            } => {
                if *universe == 0 || start >= universe {
                    bad("start must lie in [0, universe)")
                } else if deltas.is_empty() {
                    bad("at least one delta is required")
                } else if transitions.len() != deltas.len()
                    || transitions.iter().any(|row| row.len() != deltas.len())
                {
                    bad("transition matrix must be square with one row per delta")
                } else if transitions
                    .iter()
                    .any(|row| row.iter().any(|w| w.is_nan() || *w < 0.0) || row.iter().sum::<f64>() <= 0.0)
                {
                    bad("transition rows need non-negative weights with a positive sum")
                } else {
                    Ok(())
                }
            }
            Workload::ZipfianHotset {
                objects,
                object_pages,
                exponent,
                hot_pages,
                hot_fraction,
                hot_burst,
                ..
            } => {
                if *objects == 0 || *object_pages == 0 {
                    bad("objects and object_pages must be at least 1")
                } else if exponent.is_nan() || *exponent < 0.0 {
                    bad("exponent must be non-negative")
                } else if !(0.0..=1.0).contains(hot_fraction) {
                    bad("hot_fraction must lie in [0, 1]")
                } else if *hot_fraction > 0.0 && (*hot_pages == 0 || *hot_burst == 0) {
                    bad("hot_pages and hot_burst must be at least 1")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

fn zipf(n: u64, s: f64) -> Result<Zipf<f64>, TraceError> {
    Zipf::new(n as f64, s).map_err(|e| TraceError::Workload(format!("zipf: {e}")))
}

fn pages(workload: &Workload, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u64>, TraceError> {
    let mut out = Vec::with_capacity(len);
    match workload {
        Workload::CyclicScan { universe } => {
            out.extend((0..len as u64).map(|i| i % universe));
        }
        Workload::LoopingHotset {
            loop_pages,
            hot_pages,
            hot_prob,
        } => {
            let mut cursor = 0;
            while out.len() < len {
                if rng.random_bool(*hot_prob) {
                    out.push(rng.random_range(0..*hot_pages));
                } else {
                    out.push(hot_pages + cursor);
                    cursor = (cursor + 1) % loop_pages;
                }
            }
        }
        Workload::Zipfian { universe, exponent } => {
            let dist = zipf(*universe, *exponent)?;
            out.extend((0..len).map(|_| dist.sample(rng) as u64 - 1));
        }
        Workload::MarkovDelta {
            universe,
            start,
            deltas,
            transitions,
        } => {
            let rows = transitions
                .iter()
                .map(|row| WeightedIndex::new(row).map_err(|e| TraceError::Workload(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let u = i128::from(*universe);
            let mut page = *start;
            let mut state = 0;
            if len > 0 {
                out.push(page);
            }
            while out.len() < len {
                state = rows[state].sample(rng);
                page = (i128::from(page) + i128::from(deltas[state])).rem_euclid(u) as u64;
                out.push(page);
            }
        }
        Workload::ZipfianHotset {
            objects,
            object_pages,
            exponent,
            hot_pages,
            hot_fraction,
            hot_burst,
            hot_sweep,
        } => {
            let dist = zipf(*objects, *exponent)?;
            let mut cursor = 0;
            while out.len() < len {
                if rng.random_bool(*hot_fraction) {
                    for _ in 0..*hot_burst {
                        if *hot_sweep {
                            out.push(cursor);
                            cursor = (cursor + 1) % hot_pages;
                        } else {
                            out.push(rng.random_range(0..*hot_pages));
                        }
                    }
                } else {
                    let object = dist.sample(rng) as u64 - 1;
                    let base = hot_pages + object * object_pages;
                    out.extend(base..base + object_pages);
                }
            }
            out.truncate(len);
        }
    }
    Ok(out)
}

/// Generates `len` requests. Each request is a write with probability
/// `write_fraction`, drawn from a stream independent of the page stream.
pub fn generate_synthetic(
    workload: &Workload,
    len: usize,
    write_fraction: f64,
    seed: u64,
) -> Result<Vec<MemoryAccess>, TraceError> {
    workload.validate()?;
    if !(0.0..=1.0).contains(&write_fraction) {
        return Err(TraceError::Workload("write_fraction must lie in [0, 1]".into()));
    }
    let mut page_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut op_rng = ChaCha8Rng::seed_from_u64(seed);
    op_rng.set_stream(1);
    let pages = pages(workload, len, &mut page_rng)?;
    Ok(pages
        .into_iter()
        .enumerate()
        .map(|(i, p)| MemoryAccess {
            page: PageId(p),
            op: if write_fraction > 0.0 && op_rng.random_bool(write_fraction) {
                Op::Write
            } else {
                Op::Read
            },
            index: i as u64,
        })
        .collect())
}
