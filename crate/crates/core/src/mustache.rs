//! Forecast-guided victim selection.
//!
//! On a full-cache miss the policy asks a [`Forecaster`] for the next `k`
//! page deltas, turns them into the predicted page set `P̂`, and keeps
//! predicted pages out of the candidate pool `C_t = P_t \ P̂`:
//!
//! * no resident page is predicted (or there is no prediction): the fallback
//!   policy picks among all resident pages;
//! * every resident page is predicted: evict the one whose first predicted
//!   reference is farthest away;
//! * otherwise: the fallback picks among `C_t` only.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cache::{
    CacheError, CacheState, EvictionContext, FifoPolicy, LruPolicy, RandomPolicy, RestrictedChoice, VictimPolicy,
};
use crate::forecast::{predict, AuxContext, ForecastError, ForecastRequest, Forecaster, PredictionWindow};
use crate::trace::{DeltaMode, PageId};

#[derive(Debug, Error)]
pub enum MustacheError {
    #[error("no page of the restriction set is predicted")]
    EmptyIntersection,
    #[error("forecaster failed at request {time}: {source}")]
    Forecast {
        time: u64,
        #[source]
        source: ForecastError,
    },
}

impl From<MustacheError> for CacheError {
    fn from(e: MustacheError) -> Self {
        CacheError::Policy(Box::new(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    NoOverlap,
    AllPredicted,
    Partial,
}

/// `C_t` and the branch it selects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub candidates: BTreeSet<PageId>,
    pub branch: Branch,
}

impl CandidateSet {
    /// `window = None` stands for "no prediction".
    pub fn new(resident: impl IntoIterator<Item = PageId>, window: Option<&PredictionWindow>) -> Self {
        let resident: Vec<PageId> = resident.into_iter().collect();
        let candidates: BTreeSet<PageId> = resident
            .iter()
            .copied()
            .filter(|&p| window.is_none_or(|w| !w.contains(p)))
            .collect();
        let branch = if candidates.len() == resident.len() {
            Branch::NoOverlap
        } else if candidates.is_empty() {
            Branch::AllPredicted
        } else {
            Branch::Partial
        };
        Self { candidates, branch }
    }
}

/// The page of `restrict_to` whose first predicted reference is latest.
pub fn get_farthest(
    window: &PredictionWindow,
    restrict_to: impl IntoIterator<Item = PageId>,
) -> Result<PageId, MustacheError> {
    restrict_to
        .into_iter()
        .filter_map(|p| window.first_occurrence(p).map(|pos| (pos, p)))
        .max()
        .map(|(_, p)| p)
        .ok_or(MustacheError::EmptyIntersection)
}

/// Policy used for the unpredicted pages.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Fallback {
    Lru(LruPolicy),
    Fifo(FifoPolicy),
    Random(RandomPolicy),
}

impl Default for Fallback {
    fn default() -> Self {
        Fallback::Lru(LruPolicy::new())
    }
}

impl Fallback {
    fn policy(&mut self) -> &mut dyn VictimPolicy {
        match self {
            Fallback::Lru(p) => p,
            Fallback::Fifo(p) => p,
            Fallback::Random(p) => p,
        }
    }

    fn choose_among(&mut self, allowed: &dyn Fn(PageId) -> bool) -> Option<PageId> {
        match self {
            Fallback::Lru(p) => p.choose_among(allowed),
            Fallback::Fifo(p) => p.choose_among(allowed),
            Fallback::Random(p) => p.choose_among(allowed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Fallback::Lru(_) => "lru",
            Fallback::Fifo(_) => "fifo",
            Fallback::Random(_) => "random",
        }
    }
}

/// How often each branch was taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BranchCounts {
    /// Evictions where the forecaster had nothing to say.
    pub no_prediction: u64,
    pub no_overlap: u64,
    pub all_predicted: u64,
    pub partial: u64,
}

pub struct MustachePolicy {
    forecaster: Box<dyn Forecaster>,
    fallback: Fallback,
    k: usize,
    universe: u64,
    mode: DeltaMode,
    aux: AuxContext,
    counts: BranchCounts,
}

impl MustachePolicy {
    /// `universe` bounds reconstructed page ids (`2^address_bits / page_size`).
    pub fn new(forecaster: Box<dyn Forecaster>, fallback: Fallback, k: usize, universe: u64) -> Result<Self, CacheError> {
        if k == 0 {
            return Err(CacheError::Config("prediction horizon k must be at least 1".into()));
        }
        Ok(Self {
            forecaster,
            fallback,
            k,
            universe,
            mode: DeltaMode::Consecutive,
            aux: AuxContext::default(),
            counts: BranchCounts::default(),
        })
    }

    pub fn with_mode(mut self, mode: DeltaMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn horizon(&self) -> usize {
        self.k
    }

    pub fn branch_counts(&self) -> BranchCounts {
        self.counts
    }

    fn window(&mut self, ctx: &EvictionContext<'_>) -> Result<Option<PredictionWindow>, MustacheError> {
        let request = ForecastRequest {
            time: ctx.time,
            position: ctx.position,
            history: ctx.history,
            current_page: ctx.current.page,
            horizon: self.k,
            aux: &self.aux,
        };
        predict(self.forecaster.as_mut(), &request, self.universe, self.mode).map_err(|source| {
            MustacheError::Forecast {
                time: ctx.time,
                source,
            }
        })
    }
}

impl VictimPolicy for MustachePolicy {
    fn name(&self) -> &str {
        "mustache"
    }

    fn on_hit(&mut self, page: PageId, ctx: &EvictionContext<'_>) {
        self.fallback.policy().on_hit(page, ctx);
    }

    fn on_insert(&mut self, page: PageId, ctx: &EvictionContext<'_>) {
        self.fallback.policy().on_insert(page, ctx);
    }

    fn choose_victim(&mut self, state: &CacheState, ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        let window = self.window(ctx)?;
        if window.is_none() {
            self.counts.no_prediction += 1;
        }
        let set = CandidateSet::new(state.pages(), window.as_ref());
        match set.branch {
            Branch::NoOverlap => {
                self.counts.no_overlap += 1;
                self.fallback.policy().choose_victim(state, ctx)
            }
            Branch::AllPredicted => {
                self.counts.all_predicted += 1;
                let window = window.expect("AllPredicted implies a prediction");
                Ok(get_farthest(&window, state.pages())?)
            }
            Branch::Partial => {
                self.counts.partial += 1;
                self.fallback
                    .choose_among(&|p| set.candidates.contains(&p))
                    .ok_or(CacheError::NoVictim(state.len()))
            }
        }
    }

    fn on_evict(&mut self, page: PageId) {
        self.fallback.policy().on_evict(page);
    }

    fn branch_counts(&self) -> Option<BranchCounts> {
        Some(self.counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::testutil::{misses, replay, replay_accesses};
    use crate::cache::{AccessOutcome, OptPolicy};
    use crate::forecast::{Forecast, OracleForecaster};
    use crate::trace::{accesses_from_pages, MemoryAccess, Op};
    use proptest::prelude::*;

    const U: u64 = 1 << 20;

    fn ids(v: &[u64]) -> Vec<PageId> {
        v.iter().map(|&p| PageId(p)).collect()
    }

    fn window(v: &[u64]) -> PredictionWindow {
        PredictionWindow::from_pages(ids(v))
    }

    /// Predicts a fixed page list regardless of the request.
    struct Fixed(Vec<u64>);

    impl Forecaster for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn forecast(&mut self, r: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
            let mut last = r.current_page;
            let deltas = self
                .0
                .iter()
                .map(|&p| {
                    let d = PageId(p).delta_from(last);
                    last = PageId(p);
                    d
                })
                .collect();
            Ok(Forecast::Deltas(deltas))
        }
    }

    struct Silent;

    impl Forecaster for Silent {
        fn name(&self) -> &str {
            "silent"
        }
        fn forecast(&mut self, _: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
            Ok(Forecast::NoPrediction)
        }
    }

    struct Broken;

    impl Forecaster for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn forecast(&mut self, _: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
            Err(ForecastError::Unsupported("model offline".into()))
        }
    }

    fn mustache(f: impl Forecaster + 'static, k: usize) -> MustachePolicy {
        MustachePolicy::new(Box::new(f), Fallback::default(), k, U).unwrap()
    }

    #[test]
    fn farthest_examples() {
        let w = window(&[25, 19, 19, 42, 25, 37, 42, 19]);
        assert_eq!(get_farthest(&w, ids(&[25, 19, 42, 37])).unwrap(), PageId(37));
        assert_eq!(get_farthest(&window(&[5]), ids(&[5])).unwrap(), PageId(5));
        assert_eq!(get_farthest(&window(&[4, 9, 4]), ids(&[4, 9])).unwrap(), PageId(9));
        assert!(matches!(
            get_farthest(&window(&[4, 9]), ids(&[1, 2])),
            Err(MustacheError::EmptyIntersection)
        ));
    }

    #[test]
    fn candidate_sets() {
        let resident = ids(&[25, 19, 42, 37, 6]);
        let set = CandidateSet::new(resident.clone(), Some(&window(&[25, 19, 42, 37])));
        assert_eq!(set.branch, Branch::Partial);
        assert_eq!(set.candidates.into_iter().collect::<Vec<_>>(), ids(&[6]));

        let set = CandidateSet::new(ids(&[1, 2]), Some(&window(&[9, 8])));
        assert_eq!(set.branch, Branch::NoOverlap);
        assert_eq!(set.candidates.len(), 2);

        let set = CandidateSet::new(ids(&[1, 2]), None);
        assert_eq!(set.branch, Branch::NoOverlap);

        let set = CandidateSet::new(ids(&[25, 19, 42, 37]), Some(&window(&[25, 19, 19, 42, 25, 37, 42, 19])));
        assert_eq!(set.branch, Branch::AllPredicted);
        assert!(set.candidates.is_empty());
    }

    #[test]
    fn single_unpredicted_page_is_evicted() {
        // 6 is the most recently used page, so LRU alone would not pick it
        let mut p = mustache(Fixed(vec![25, 19, 42, 37]), 4);
        let (_, out) = replay(&[25, 19, 42, 37, 6, 99], 5, &mut p);
        assert_eq!(out[5].victim(), Some(PageId(6)));
        assert_eq!(p.branch_counts().partial, 1);
    }

    #[test]
    fn no_overlap_uses_lru() {
        let mut p = mustache(Fixed(vec![9, 8]), 2);
        let (_, out) = replay(&[1, 2, 1, 3], 2, &mut p);
        assert_eq!(out[3].victim(), Some(PageId(2)));
        assert_eq!(p.branch_counts().no_overlap, 1);
    }

    #[test]
    fn all_predicted_takes_farthest() {
        let mut p = mustache(Fixed(vec![25, 19, 19, 42, 25, 37, 42, 19]), 8);
        let (_, out) = replay(&[37, 25, 19, 42, 50], 4, &mut p);
        assert_eq!(out[4].victim(), Some(PageId(37)));
        assert_eq!(p.branch_counts().all_predicted, 1);
    }

    #[test]
    fn partial_victim_is_least_recent_candidate() {
        // resident 1..=4 (LRU order 1, 2, 3, 4); 1 and 3 predicted
        let mut p = mustache(Fixed(vec![3, 1]), 2);
        let (_, out) = replay(&[1, 2, 3, 4, 5], 4, &mut p);
        assert_eq!(out[4].victim(), Some(PageId(2)));
    }

    #[test]
    fn forecaster_errors_propagate() {
        let mut p = mustache(Broken, 3);
        let trace = accesses_from_pages(&[1, 2, 3]);
        let mut state = CacheState::new(2);
        for i in 0..2 {
            state.access(&trace[i], &mut p, &EvictionContext::at(&trace, i, 4)).unwrap();
        }
        let err = state.access(&trace[2], &mut p, &EvictionContext::at(&trace, 2, 4));
        assert!(matches!(err, Err(CacheError::Policy(_))));
    }

    #[test]
    fn forecaster_only_queried_on_eviction() {
        struct Counting(usize);
        impl Forecaster for Counting {
            fn name(&self) -> &str {
                "counting"
            }
            fn forecast(&mut self, _: &ForecastRequest<'_>) -> Result<Forecast, ForecastError> {
                self.0 += 1;
                assert!(self.0 <= 2, "queried on a hit or cold miss");
                Ok(Forecast::NoPrediction)
            }
        }
        let mut p = mustache(Counting(0), 3);
        // cold, cold, hit, evict, hit, evict
        let (_, out) = replay(&[1, 2, 1, 3, 3, 4], 2, &mut p);
        assert_eq!(misses(&out), 4);
        assert_eq!(p.branch_counts().no_prediction, 2);
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(MustachePolicy::new(Box::new(Silent), Fallback::default(), 0, U).is_err());
    }

    fn trace_strategy() -> impl Strategy<Value = (Vec<MemoryAccess>, usize)> {
        (prop::collection::vec((0u64..12, any::<bool>()), 1..300), 1usize..6).prop_map(|(reqs, k)| {
            let trace = reqs
                .into_iter()
                .enumerate()
                .map(|(i, (p, w))| MemoryAccess::new(i as u64, p, if w { Op::Write } else { Op::Read }))
                .collect();
            (trace, k)
        })
    }

    proptest! {
        #[test]
        fn silent_forecaster_is_lru((trace, cap) in trace_strategy()) {
            let (_, lru) = replay_accesses(&trace, cap, &mut LruPolicy::new());
            let (_, ours) = replay_accesses(&trace, cap, &mut mustache(Silent, 10));
            prop_assert_eq!(lru, ours);
        }

        #[test]
        fn perfect_full_horizon_matches_opt((trace, cap) in trace_strategy()) {
            let (_, opt) = replay_accesses(&trace, cap, &mut OptPolicy::new(&trace));
            let mut p = mustache(OracleForecaster::perfect(&trace), trace.len());
            let (_, ours) = replay_accesses(&trace, cap, &mut p);
            prop_assert_eq!(misses(&opt), misses(&ours));
        }

        #[test]
        fn partial_victims_are_unpredicted((trace, cap) in trace_strategy(), k in 1usize..8) {
            // with an exact k-step oracle the victim never recurs within k requests
            let mut p = mustache(OracleForecaster::perfect(&trace), k);
            let (_, out) = replay_accesses(&trace, cap, &mut p);
            for (i, o) in out.iter().enumerate() {
                if let AccessOutcome::EvictMiss { victim, .. } = o {
                    let next = trace[i + 1..].iter().take(k).position(|a| a.page == *victim);
                    let farthest = trace[i + 1..].iter().take(k).map(|a| a.page).collect::<BTreeSet<_>>().len();
                    prop_assert!(next.is_none() || farthest >= cap);
                }
            }
        }
    }
}
