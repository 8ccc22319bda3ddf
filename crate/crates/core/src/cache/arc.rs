//! Adaptive Replacement Cache.
//!
//! Follows the published ARC pseudocode: resident lists `T1` (seen once
//! recently) and `T2` (seen at least twice), ghost lists `B1`/`B2` holding
//! recently evicted page ids, and a target size `p` for `T1` that ghost hits
//! move up (`B1`) or down (`B2`).

use super::{CacheError, CacheState, EvictionContext, RecencyList, VictimPolicy};
use crate::trace::PageId;

#[derive(Clone, Debug)]
pub struct ArcPolicy {
    capacity: usize,
    p: f64,
    t1: RecencyList,
    t2: RecencyList,
    b1: RecencyList,
    b2: RecencyList,
    // whether the pending victim should be remembered in a ghost list
    ghost_victim: bool,
}

impl ArcPolicy {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ARC needs at least one frame");
        Self {
            capacity,
            p: 0.0,
            t1: RecencyList::new(),
            t2: RecencyList::new(),
            b1: RecencyList::new(),
            b2: RecencyList::new(),
            ghost_victim: true,
        }
    }

    pub fn target(&self) -> f64 {
        self.p
    }

    pub fn t1(&self) -> &RecencyList {
        &self.t1
    }

    pub fn t2(&self) -> &RecencyList {
        &self.t2
    }

    pub fn b1(&self) -> &RecencyList {
        &self.b1
    }

    pub fn b2(&self) -> &RecencyList {
        &self.b2
    }

    /// REPLACE(x, p): LRU of `T1` if it is over target, otherwise LRU of `T2`.
    fn replace(&mut self, requested_in_b2: bool) -> Option<PageId> {
        let t1 = self.t1.len() as f64;
        let from_t1 = !self.t1.is_empty()
            && ((requested_in_b2 && t1 == self.p) || t1 > self.p)
            || self.t2.is_empty();
        self.ghost_victim = true;
        if from_t1 {
            self.t1.lru()
        } else {
            self.t2.lru()
        }
    }
}

impl VictimPolicy for ArcPolicy {
    fn name(&self) -> &str {
        "arc"
    }

    fn on_hit(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        self.t1.remove(page);
        self.t2.push_mru(page);
    }

    fn on_insert(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        if self.b1.remove(page) || self.b2.remove(page) {
            self.t2.push_mru(page);
        } else {
            self.t1.push_mru(page);
        }
    }

    fn choose_victim(&mut self, state: &CacheState, ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        let x = ctx.current.page;
        let c = self.capacity as f64;
        let (b1, b2) = (self.b1.len() as f64, self.b2.len() as f64);
        let victim = if self.b1.contains(x) {
            let step = if b1 >= b2 { 1.0 } else { b2 / b1 };
            self.p = (self.p + step).min(c);
            self.replace(false)
        } else if self.b2.contains(x) {
            let step = if b2 >= b1 { 1.0 } else { b1 / b2 };
            self.p = (self.p - step).max(0.0);
            self.replace(true)
        } else {
            let l1 = self.t1.len() + self.b1.len();
            let total = l1 + self.t2.len() + self.b2.len();
            if l1 >= self.capacity {
                if self.t1.len() < self.capacity {
                    self.b1.pop_lru();
                    self.replace(false)
                } else {
                    // T1 fills the whole cache: drop its LRU without a ghost
                    self.ghost_victim = false;
                    self.t1.lru()
                }
            } else {
                if total >= 2 * self.capacity {
                    self.b2.pop_lru();
                }
                self.replace(false)
            }
        };
        victim.ok_or(CacheError::NoVictim(state.len()))
    }

    fn on_evict(&mut self, page: PageId) {
        let ghost = std::mem::replace(&mut self.ghost_victim, true);
        if self.t1.remove(page) {
            if ghost {
                self.b1.push_mru(page);
            }
        } else if self.t2.remove(page) && ghost {
            self.b2.push_mru(page);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::testutil::*;
    use crate::cache::LruPolicy;
    use crate::trace::{generate_synthetic, Workload};

    fn ids(l: &RecencyList) -> Vec<u64> {
        l.iter().map(|p| p.0).collect()
    }

    #[test]
    fn promotion_on_second_reference() {
        let mut arc = ArcPolicy::new(2);
        replay(&[1, 2, 1], 2, &mut arc);
        assert_eq!(ids(arc.t1()), vec![2]);
        assert_eq!(ids(arc.t2()), vec![1]);
    }

    #[test]
    fn replace_prefers_t1_at_zero_target() {
        // p = 0, |T1| = 1 ≥ max(1, p): T1's LRU goes
        let mut arc = ArcPolicy::new(2);
        let (_, out) = replay(&[1, 1, 2, 3], 2, &mut arc);
        assert_eq!(arc.target(), 0.0);
        assert_eq!(out[3].victim(), Some(PageId(2)));
        assert_eq!(ids(arc.b1()), vec![2]);
        assert_eq!(ids(arc.t2()), vec![1]);
    }

    #[test]
    fn ghost_hits_adapt_target() {
        let mut arc = ArcPolicy::new(2);
        // 2 is evicted into B1, then requested again
        replay(&[1, 1, 2, 3, 2], 2, &mut arc);
        assert_eq!(arc.target(), 1.0);
        assert!(arc.t2().contains(PageId(2)));
        assert!(!arc.b1().contains(PageId(2)));

        let mut arc = ArcPolicy::new(2);
        // 1 leaves T2 for B2, then returns: p stays clamped at 0
        replay(&[1, 1, 2, 2, 3, 1], 2, &mut arc);
        assert_eq!(arc.target(), 0.0);
        assert!(arc.t2().contains(PageId(1)));
    }

    #[test]
    fn directory_bounds() {
        let w = Workload::Zipfian {
            universe: 40,
            exponent: 0.8,
        };
        let trace = generate_synthetic(&w, 5000, 0.0, 3).unwrap();
        let mut arc = ArcPolicy::new(6);
        let mut state = CacheState::new(6);
        for i in 0..trace.len() {
            let ctx = EvictionContext::at(&trace, i, 1);
            state.access(&trace[i], &mut arc, &ctx).unwrap();
            let resident = arc.t1().len() + arc.t2().len();
            assert_eq!(resident, state.len());
            assert!(arc.t1().len() + arc.b1().len() <= 6);
            assert!(arc.b1().len() + arc.b2().len() <= 6);
            assert!(arc.t1().iter().chain(arc.t2().iter()).all(|p| state.contains(p)));
            assert!(arc.b1().iter().chain(arc.b2().iter()).all(|p| !state.contains(p)));
            assert!((0.0..=6.0).contains(&arc.target()));
        }
    }

    #[test]
    fn scan_resistance_beats_lru() {
        let w = Workload::LoopingHotset {
            loop_pages: 90,
            hot_pages: 10,
            hot_prob: 0.5,
        };
        let trace = generate_synthetic(&w, 20_000, 0.0, 7).unwrap();
        let hits = |out: &[crate::cache::AccessOutcome]| out.len() - misses(out);
        let arc = hits(&replay_accesses(&trace, 10, &mut ArcPolicy::new(10)).1);
        let lru = hits(&replay_accesses(&trace, 10, &mut LruPolicy::new()).1);
        assert!(arc >= lru, "arc {arc} lru {lru}");
    }
}
