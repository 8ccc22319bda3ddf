use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CacheError, CacheState, EvictionContext, RestrictedChoice, VictimPolicy};
use crate::trace::PageId;

/// Evicts a uniformly drawn resident page.
///
/// Draws come from a seeded generator, so the victim sequence is a function of
/// the seed and the call sequence.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    pages: Vec<PageId>,
    slot: HashMap<PageId, usize>,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pages: Vec::new(),
            slot: HashMap::new(),
        }
    }
}

impl VictimPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn on_hit(&mut self, _page: PageId, _ctx: &EvictionContext<'_>) {}

    fn on_insert(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        if !self.slot.contains_key(&page) {
            self.slot.insert(page, self.pages.len());
            self.pages.push(page);
        }
    }

    fn choose_victim(&mut self, state: &CacheState, _ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        if self.pages.is_empty() {
            return Err(CacheError::NoVictim(state.len()));
        }
        Ok(self.pages[self.rng.random_range(0..self.pages.len())])
    }

    fn on_evict(&mut self, page: PageId) {
        if let Some(i) = self.slot.remove(&page) {
            self.pages.swap_remove(i);
            if let Some(&moved) = self.pages.get(i) {
                self.slot.insert(moved, i);
            }
        }
    }
}

impl RestrictedChoice for RandomPolicy {
    fn choose_among(&mut self, allowed: &dyn Fn(PageId) -> bool) -> Option<PageId> {
        let pool: Vec<PageId> = self.pages.iter().copied().filter(|&p| allowed(p)).collect();
        if pool.is_empty() {
            None
        } else {
            Some(pool[self.rng.random_range(0..pool.len())])
        }
    }
}
