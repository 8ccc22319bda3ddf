use std::collections::{BTreeMap, HashMap};

use crate::trace::PageId;

/// Pages ordered from least to most recently pushed.
///
/// Backed by a stamp index so that removal from the middle is `O(log n)`.
#[derive(Clone, Debug, Default)]
pub struct RecencyList {
    stamps: HashMap<PageId, u64>,
    order: BTreeMap<u64, PageId>,
    clock: u64,
}

impl RecencyList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.stamps.contains_key(&page)
    }

    /// Inserts `page` at the MRU end, moving it there if already present.
    pub fn push_mru(&mut self, page: PageId) {
        if let Some(old) = self.stamps.insert(page, self.clock) {
            self.order.remove(&old);
        }
        self.order.insert(self.clock, page);
        self.clock += 1;
    }

    pub fn remove(&mut self, page: PageId) -> bool {
        match self.stamps.remove(&page) {
            Some(stamp) => {
                self.order.remove(&stamp);
                true
            }
            None => false,
        }
    }

    pub fn lru(&self) -> Option<PageId> {
        self.order.values().next().copied()
    }

    pub fn pop_lru(&mut self) -> Option<PageId> {
        let (_, page) = self.order.pop_first()?;
        self.stamps.remove(&page);
        Some(page)
    }

    /// Iterates from the LRU end to the MRU end.
    pub fn iter(&self) -> impl Iterator<Item = PageId> + '_ {
        self.order.values().copied()
    }

    pub fn clear(&mut self) {
        self.stamps.clear();
        self.order.clear();
    }
}
