use std::collections::HashMap;

use super::{CacheError, CacheState, EvictionContext, VictimPolicy};
use crate::trace::{MemoryAccess, PageId};

/// "Never used again" in a next-use table.
pub const NEVER: usize = usize::MAX;

/// For every position, the next position requesting the same page (or [`NEVER`]).
pub fn precompute_next_use(accesses: &[MemoryAccess]) -> Vec<usize> {
    let mut next = vec![NEVER; accesses.len()];
    let mut seen: HashMap<PageId, usize> = HashMap::new();
    for (i, a) in accesses.iter().enumerate().rev() {
        if let Some(j) = seen.insert(a.page, i) {
            next[i] = j;
        }
    }
    next
}

/// Bélády's clairvoyant policy: evicts the resident page whose next use is
/// farthest away. Ties (several pages never used again) go to the smallest
/// page id.
#[derive(Clone, Debug)]
pub struct OptPolicy {
    next_use: Vec<usize>,
    upcoming: HashMap<PageId, usize>,
}

impl OptPolicy {
    /// Builds the policy for one replay of `trace`; contexts must carry
    /// positions into this same slice.
    pub fn new(trace: &[MemoryAccess]) -> Self {
        Self {
            next_use: precompute_next_use(trace),
            upcoming: HashMap::new(),
        }
    }

    fn record(&mut self, page: PageId, ctx: &EvictionContext<'_>) {
        let next = self.next_use.get(ctx.position).copied().unwrap_or(NEVER);
        self.upcoming.insert(page, next);
    }
}

impl VictimPolicy for OptPolicy {
    fn name(&self) -> &str {
        "opt"
    }

    fn on_hit(&mut self, page: PageId, ctx: &EvictionContext<'_>) {
        self.record(page, ctx);
    }

    fn on_insert(&mut self, page: PageId, ctx: &EvictionContext<'_>) {
        self.record(page, ctx);
    }

    fn choose_victim(&mut self, state: &CacheState, _ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        state
            .pages()
            .map(|p| (self.upcoming.get(&p).copied().unwrap_or(NEVER), p))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, p)| p)
            .ok_or(CacheError::NoVictim(state.len()))
    }

    fn on_evict(&mut self, page: PageId) {
        self.upcoming.remove(&page);
    }
}
