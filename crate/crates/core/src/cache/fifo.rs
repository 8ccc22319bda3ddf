use super::{CacheError, CacheState, EvictionContext, RecencyList, RestrictedChoice, VictimPolicy};
use crate::trace::PageId;

/// Evicts the page that was loaded first; hits do not reorder.
#[derive(Clone, Debug, Default)]
pub struct FifoPolicy {
    queue: RecencyList,
}

impl FifoPolicy {
    pub fn new() -> Self {
        Self::default()
    }
}

impl VictimPolicy for FifoPolicy {
    fn name(&self) -> &str {
        "fifo"
    }

    fn on_hit(&mut self, _page: PageId, _ctx: &EvictionContext<'_>) {}

    fn on_insert(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        self.queue.push_mru(page);
    }

    fn choose_victim(&mut self, state: &CacheState, _ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        self.queue.lru().ok_or(CacheError::NoVictim(state.len()))
    }

    fn on_evict(&mut self, page: PageId) {
        self.queue.remove(page);
    }
}

impl RestrictedChoice for FifoPolicy {
    fn choose_among(&mut self, allowed: &dyn Fn(PageId) -> bool) -> Option<PageId> {
        self.queue.iter().find(|&p| allowed(p))
    }
}
