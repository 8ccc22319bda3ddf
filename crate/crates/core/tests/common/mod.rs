//! Shared fixtures: a seeded random-trace corpus, an exhaustive optimal-miss
//! solver and small forecaster stubs.
#![allow(dead_code)]

use std::collections::HashMap;

use mustache_core::cache::{CacheState, EvictionContext, VictimPolicy};
use mustache_core::forecast::{Forecast, ForecastError, ForecastRequest, Forecaster};
use mustache_core::trace::{generate_synthetic, MemoryAccess, Op, Workload};
use mustache_core::AccessOutcome;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One corpus entry.
#[derive(Clone, Debug)]
pub struct Case {
    pub trace: Vec<MemoryAccess>,
    pub frames: usize,
}

/// Random traces of length 200..=2000 over 50 pages with `K ∈ 3..=10`,
/// alternating uniform and Zipf-skewed page draws, 30% writes.
pub fn corpus(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let len = rng.random_range(200..=2000);
            let frames = rng.random_range(3..=10);
            let exponent = if i % 2 == 0 { 0.0 } else { rng.random_range(0.5..1.5) };
            let w = Workload::Zipfian {
                universe: 50,
                exponent,
            };
            Case {
                trace: generate_synthetic(&w, len, 0.3, rng.random()).unwrap(),
                frames,
            }
        })
        .collect()
}

/// Short traces for exhaustive checks: length `1..=max_len`, universe
/// `1..=max_universe`, `K ∈ 1..=max_frames`.
pub fn small_corpus(count: usize, max_len: usize, max_universe: u64, max_frames: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            let universe = rng.random_range(1..=max_universe);
            let trace = (0..len)
                .map(|i| {
                    let op = if rng.random_bool(0.3) { Op::Write } else { Op::Read };
                    MemoryAccess::new(i as u64, rng.random_range(0..universe), op)
                })
                .collect();
            Case {
                trace,
                frames: rng.random_range(1..=max_frames),
            }
        })
        .collect()
}

/// Fewest misses achievable on `trace` with `frames` frames, by trying every
/// victim at every eviction (memoized on position and resident set).
pub fn min_misses(trace: &[MemoryAccess], frames: usize) -> u64 {
    fn go(
        trace: &[MemoryAccess],
        frames: usize,
        pos: usize,
        resident: Vec<u64>,
        memo: &mut HashMap<(usize, Vec<u64>), u64>,
    ) -> u64 {
        if pos == trace.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(pos, resident.clone())) {
            return v;
        }
        let page = trace[pos].page.0;
        let best = if resident.contains(&page) {
            go(trace, frames, pos + 1, resident.clone(), memo)
        } else if resident.len() < frames {
            let mut next = resident.clone();
            next.push(page);
            next.sort_unstable();
            1 + go(trace, frames, pos + 1, next, memo)
        } else {
            (0..resident.len())
                .map(|i| {
                    let mut next = resident.clone();
                    next[i] = page;
                    next.sort_unstable();
                    1 + go(trace, frames, pos + 1, next, memo)
                })
                .min()
                .unwrap()
        };
        memo.insert((pos, resident), best);
        best
    }
    go(trace, frames, 0, Vec::new(), &mut HashMap::new())
}

/// Replays `trace` and returns every outcome, asserting residency bounds.
pub fn outcomes(trace: &[MemoryAccess], frames: usize, policy: &mut dyn VictimPolicy, w: usize) -> Vec<AccessOutcome> {
    let mut state = CacheState::new(frames);
    trace
        .iter()
        .enumerate()
        .map(|(i, req)| {
            let out = state.access(req, policy, &EvictionContext::at(trace, i, w)).unwrap();
            assert!(state.len() <= frames);
            out
        })
        .collect()
}

pub fn miss_count(outcomes: &[AccessOutcome]) -> u64 {
    outcomes.iter().filter(|o| !o.is_hit()).count() as u64
}

/// Never has a prediction.
pub struct Silent;

impl Forecaster for Silent {
    fn name(&self) -> &str {
        "silent"
    }

    fn forecast(&mut self, _: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
        Ok(Forecast::NoPrediction)
    }
}

/// Always predicts pages far outside any corpus universe.
pub struct Elsewhere;

impl Forecaster for Elsewhere {
    fn name(&self) -> &str {
        "elsewhere"
    }

    fn forecast(&mut self, r: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
        let jump = 1_000_000 - r.current_page.0 as i64;
        let mut d = vec![1; r.horizon];
        d[0] = jump;
        Ok(Forecast::Deltas(d))
    }
}
