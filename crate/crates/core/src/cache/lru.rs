use super::{CacheError, CacheState, EvictionContext, RecencyList, RestrictedChoice, VictimPolicy};
use crate::trace::PageId;

/// Exact LRU: evicts the page whose last reference is oldest.
#[derive(Clone, Debug, Default)]
pub struct LruPolicy {
    order: RecencyList,
}

impl LruPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resident pages from least to most recently used.
    pub fn recency_order(&self) -> impl Iterator<Item = PageId> + '_ {
        self.order.iter()
    }
}

impl VictimPolicy for LruPolicy {
    fn name(&self) -> &str {
        "lru"
    }

    fn on_hit(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        self.order.push_mru(page);
    }

    fn on_insert(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        self.order.push_mru(page);
    }

    fn choose_victim(&mut self, state: &CacheState, _ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        self.order.lru().ok_or(CacheError::NoVictim(state.len()))
    }

    fn on_evict(&mut self, page: PageId) {
        self.order.remove(page);
    }
}

impl RestrictedChoice for LruPolicy {
    fn choose_among(&mut self, allowed: &dyn Fn(PageId) -> bool) -> Option<PageId> {
        self.order.iter().find(|&p| allowed(p))
    }
}
