use std::collections::HashMap;

use super::{CacheError, CacheState, EvictionContext, VictimPolicy};
use crate::trace::PageId;

#[derive(Clone, Copy, Debug)]
struct Slot {
    page: PageId,
    referenced: bool,
}

/// Second-chance CLOCK over a fixed ring of frames.
///
/// Loads and hits set the reference bit. The hand clears set bits as it
/// sweeps and stops at the first clear one; it then rests just past the victim.
#[derive(Clone, Debug)]
pub struct ClockPolicy {
    slots: Vec<Option<Slot>>,
    slot_of: HashMap<PageId, usize>,
    free: Vec<usize>,
    hand: usize,
}

impl ClockPolicy {
    pub fn new(frames: usize) -> Self {
        assert!(frames > 0, "CLOCK needs at least one frame");
        Self {
            slots: vec![None; frames],
            slot_of: HashMap::new(),
            free: (0..frames).rev().collect(),
            hand: 0,
        }
    }

    pub fn hand(&self) -> usize {
        self.hand
    }

    /// `(page, reference bit)` of a frame.
    pub fn frame(&self, index: usize) -> Option<(PageId, bool)> {
        self.slots[index].map(|s| (s.page, s.referenced))
    }

    pub fn set_referenced(&mut self, page: PageId, referenced: bool) {
        if let Some(&i) = self.slot_of.get(&page) {
            if let Some(slot) = self.slots[i].as_mut() {
                slot.referenced = referenced;
            }
        }
    }
}

impl VictimPolicy for ClockPolicy {
    fn name(&self) -> &str {
        "clock"
    }

    fn on_hit(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        self.set_referenced(page, true);
    }

    fn on_insert(&mut self, page: PageId, _ctx: &EvictionContext<'_>) {
        let i = self.free.pop().expect("CLOCK ring has no free frame");
        self.slots[i] = Some(Slot {
            page,
            referenced: true,
        });
        self.slot_of.insert(page, i);
    }

    fn choose_victim(&mut self, state: &CacheState, _ctx: &EvictionContext<'_>) -> Result<PageId, CacheError> {
        let n = self.slots.len();
        // two sweeps always suffice: the first clears every bit
        for _ in 0..2 * n {
            let i = self.hand;
            self.hand = (self.hand + 1) % n;
            if let Some(slot) = self.slots[i].as_mut() {
                if slot.referenced {
                    slot.referenced = false;
                } else {
                    return Ok(slot.page);
                }
            }
        }
        Err(CacheError::NoVictim(state.len()))
    }

    fn on_evict(&mut self, page: PageId) {
        if let Some(i) = self.slot_of.remove(&page) {
            self.slots[i] = None;
            self.free.push(i);
        }
    }
}
