//! Fixed-capacity page cache with pluggable victim selection.
//!
//! [`CacheState`] owns the resident set `P_t` and the dirty bits; a
//! [`VictimPolicy`] owns whatever ordering metadata it needs and is notified of
//! every hit, insertion and eviction. On a miss with a full cache the policy
//! picks the victim `p*` and the new set is `P_t \ {p*} ∪ {p}`.

mod arc;
mod clock;
mod fifo;
mod lru;
mod opt;
mod random;
mod recency;

use std::error::Error as StdError;

use indexmap::IndexMap;
use thiserror::Error;

use crate::trace::{MemoryAccess, PageId};

pub use arc::ArcPolicy;
pub use clock::ClockPolicy;
pub use fifo::FifoPolicy;
pub use lru::LruPolicy;
pub use opt::{precompute_next_use, OptPolicy, NEVER};
pub use random::RandomPolicy;
pub use recency::RecencyList;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("policy chose page {0}, which is not resident")]
    NonResidentVictim(PageId),
    #[error("policy has no victim among {0} resident pages")]
    NoVictim(usize),
    #[error("invalid cache configuration: {0}")]
    Config(String),
    #[error("victim selection failed: {0}")]
    Policy(#[source] Box<dyn StdError + Send + Sync>),
}

/// Geometry of the simulated cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheConfig {
    /// Number of page frames `K`.
    pub num_frames: usize,
    /// Page size `B` in bytes.
    pub page_size: u64,
    /// Width of the logical address space; `L = 2^address_bits / B`.
    pub address_bits: u32,
}

impl CacheConfig {
    pub const DEFAULT_PAGE_SIZE: u64 = 4096;
    pub const DEFAULT_CACHE_BYTES: u64 = 40 * 1024;
    pub const DEFAULT_ADDRESS_BITS: u32 = 32;

    pub fn new(num_frames: usize, page_size: u64, address_bits: u32) -> Result<Self, CacheError> {
        let cfg = Self {
            num_frames,
            page_size,
            address_bits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Derives `K` from a byte budget, e.g. 40 KiB of 4 KiB pages is 10 frames.
    pub fn from_bytes(cache_bytes: u64, page_size: u64, address_bits: u32) -> Result<Self, CacheError> {
        if page_size == 0 || !cache_bytes.is_multiple_of(page_size) {
            return Err(CacheError::Config(format!(
                "cache size {cache_bytes} is not a multiple of the page size {page_size}"
            )));
        }
        Self::new((cache_bytes / page_size) as usize, page_size, address_bits)
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        if self.num_frames == 0 {
            return Err(CacheError::Config("at least one frame is required".into()));
        }
        if !self.page_size.is_power_of_two() {
            return Err(CacheError::Config(format!(
                "page size {} is not a power of two",
                self.page_size
            )));
        }
        let page_bits = self.page_size.trailing_zeros();
        if self.address_bits > 64 || self.address_bits < page_bits {
            return Err(CacheError::Config(format!(
                "address width {} cannot hold pages of {} bytes",
                self.address_bits, self.page_size
            )));
        }
        Ok(())
    }

    /// Number of logical pages `L`.
    pub fn page_universe(&self) -> u64 {
        let bits = self.address_bits - self.page_size.trailing_zeros();
        if bits >= 64 {
            u64::MAX
        } else {
            1u64 << bits
        }
    }

    pub fn cache_bytes(&self) -> u64 {
        self.num_frames as u64 * self.page_size
    }
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            num_frames: (Self::DEFAULT_CACHE_BYTES / Self::DEFAULT_PAGE_SIZE) as usize,
            page_size: Self::DEFAULT_PAGE_SIZE,
            address_bits: Self::DEFAULT_ADDRESS_BITS,
        }
    }
}

/// What happened to one request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessOutcome {
    Hit,
    /// Miss served by a free frame.
    ColdMiss,
    /// Miss that displaced `victim`.
    EvictMiss { victim: PageId, victim_was_dirty: bool },
}

impl AccessOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, AccessOutcome::Hit)
    }

    pub fn victim(&self) -> Option<PageId> {
        match self {
            AccessOutcome::EvictMiss { victim, .. } => Some(*victim),
            _ => None,
        }
    }
}

/// What a policy may look at when handling a request.
#[derive(Clone, Copy, Debug)]
pub struct EvictionContext<'a> {
    /// Global request index `t` (as stored in [`MemoryAccess::index`]).
    pub time: u64,
    /// Offset of the request within the replayed sequence.
    pub position: usize,
    /// The last `w` requests, oldest first, ending with `current`.
    pub history: &'a [MemoryAccess],
    pub current: MemoryAccess,
}

impl<'a> EvictionContext<'a> {
    /// Context for request `position` of `trace`, with a look-back of `w`.
    pub fn at(trace: &'a [MemoryAccess], position: usize, w: usize) -> Self {
        let start = (position + 1).saturating_sub(w.max(1));
        let current = trace[position];
        Self {
            time: current.index,
            position,
            history: &trace[start..=position],
            current,
        }
    }
}

/// Victim selection plus the bookkeeping it depends on.
///
/// The cache calls `on_hit` for hits, `on_insert` after every load, and
/// `choose_victim` followed by `on_evict` when a full cache misses.
pub trait VictimPolicy: Send {
    fn name(&self) -> &str;

    fn on_hit(&mut self, page: PageId, ctx: &EvictionContext<'_>);

    fn on_insert(&mut self, page: PageId, ctx: &EvictionContext<'_>);

    /// Picks a resident page to evict. Only called when the cache is full.
    fn choose_victim(
        &mut self,
        state: &CacheState,
        ctx: &EvictionContext<'_>,
    ) -> Result<PageId, CacheError>;

    fn on_evict(&mut self, page: PageId);

    /// Branch statistics of forecast-driven policies.
    fn branch_counts(&self) -> Option<crate::mustache::BranchCounts> {
        None
    }
}

/// A policy that can also pick a victim from a subset of the resident pages.
pub trait RestrictedChoice {
    /// Highest-priority victim among pages for which `allowed` holds.
    fn choose_among(&mut self, allowed: &dyn Fn(PageId) -> bool) -> Option<PageId>;
}

/// Resident pages `P_t` and their dirty bits.
#[derive(Clone, Debug)]
pub struct CacheState {
    capacity: usize,
    frames: IndexMap<PageId, bool>,
}

impl CacheState {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cache needs at least one frame");
        Self {
            capacity,
            frames: IndexMap::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.frames.len() >= self.capacity
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.frames.contains_key(&page)
    }

    pub fn is_dirty(&self, page: PageId) -> bool {
        self.frames.get(&page).copied().unwrap_or(false)
    }

    /// Resident pages in a deterministic (but unspecified) order.
    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.frames.keys().copied()
    }

    /// Serves one request.
    pub fn access(
        &mut self,
        request: &MemoryAccess,
        policy: &mut dyn VictimPolicy,
        ctx: &EvictionContext<'_>,
    ) -> Result<AccessOutcome, CacheError> {
        let page = request.page;
        let write = request.op.is_write();
        if let Some(dirty) = self.frames.get_mut(&page) {
            *dirty |= write;
            policy.on_hit(page, ctx);
            return Ok(AccessOutcome::Hit);
        }
        if self.frames.len() < self.capacity {
            self.frames.insert(page, write);
            policy.on_insert(page, ctx);
            return Ok(AccessOutcome::ColdMiss);
        }
        let victim = policy.choose_victim(self, ctx)?;
        let victim_was_dirty = self
            .frames
            .swap_remove(&victim)
            .ok_or(CacheError::NonResidentVictim(victim))?;
        policy.on_evict(victim);
        self.frames.insert(page, write);
        policy.on_insert(page, ctx);
        Ok(AccessOutcome::EvictMiss {
            victim,
            victim_was_dirty,
        })
    }
}
