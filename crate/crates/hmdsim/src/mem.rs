//! Two-tier memory state: the local node and the remote pool, per-page
//! records, watermark accounting, and recency/frequency demotion candidacy.

use crate::error::{Error, Result};
use crate::telemetry::ClusterState;

pub type PageId = u64;

/// Default slack between the promotion gate and the demotion-daemon trigger.
pub const DEFAULT_SLACK_BYTES: u64 = 10 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Local,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPlacement {
    /// Every page starts in the remote pool; migration decides placement.
    AllRemote,
    /// Fill the local allocation front-to-back, remainder remote.
    FillLocalThenRemote,
}

/// Per-page bookkeeping: location, poisoning state, telemetry estimates,
/// and recency.
#[derive(Debug, Clone)]
pub struct PageRecord {
    pub id: PageId,
    pub location: Location,
    pub marked: bool,
    /// Most recent marking time M_i, simulated ns.
    pub mark_time_ns: Option<f64>,
    /// Most recent post-marking access time A_i, simulated ns.
    pub access_time_ns: Option<f64>,
    pub burst: ClusterState,
    /// Latest point access-rate estimate F_i, accesses/second.
    pub rate: Option<f64>,
    /// Baseline EWMA estimate, accesses/second.
    pub ewma_rate: Option<f64>,
    /// Most recent access of any kind, simulated ns.
    pub last_access_ns: Option<f64>,
}

impl PageRecord {
    fn new(id: PageId, location: Location) -> Self {
        Self {
            id,
            location,
            marked: false,
            mark_time_ns: None,
            access_time_ns: None,
            burst: ClusterState::default(),
            rate: None,
            ewma_rate: None,
            last_access_ns: None,
        }
    }
}

/// Intrusive doubly-linked recency list over local pages. Head is the most
/// recently used page.
#[derive(Debug, Clone)]
struct LruList {
    prev: Vec<Option<usize>>,
    next: Vec<Option<usize>>,
    member: Vec<bool>,
    head: Option<usize>,
    tail: Option<usize>,
    len: usize,
}

impl LruList {
    fn new(n: usize) -> Self {
        Self {
            prev: vec![None; n],
            next: vec![None; n],
            member: vec![false; n],
            head: None,
            tail: None,
            len: 0,
        }
    }

    fn push_front(&mut self, i: usize) {
        debug_assert!(!self.member[i]);
        self.member[i] = true;
        self.prev[i] = None;
        self.next[i] = self.head;
        if let Some(h) = self.head {
            self.prev[h] = Some(i);
        }
        self.head = Some(i);
        if self.tail.is_none() {
            self.tail = Some(i);
        }
        self.len += 1;
    }

    fn remove(&mut self, i: usize) {
        debug_assert!(self.member[i]);
        match self.prev[i] {
            Some(p) => self.next[p] = self.next[i],
            None => self.head = self.next[i],
        }
        match self.next[i] {
            Some(n) => self.prev[n] = self.prev[i],
            None => self.tail = self.prev[i],
        }
        self.prev[i] = None;
        self.next[i] = None;
        self.member[i] = false;
        self.len -= 1;
    }

    fn touch(&mut self, i: usize) {
        if self.member[i] {
            self.remove(i);
        }
        self.push_front(i);
    }

    fn iter_from_tail(&self) -> LruTailIter<'_> {
        LruTailIter {
            list: self,
            cur: self.tail,
        }
    }
}

struct LruTailIter<'a> {
    list: &'a LruList,
    cur: Option<usize>,
}

impl Iterator for LruTailIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let i = self.cur?;
        self.cur = self.list.prev[i];
        Some(i)
    }
}

/// The two-tier memory state of one tenant.
///
/// `local_alloc` is the hard cap on local usage: the LOW watermark sits at
/// the allocation and gates promotions, and the HIGH watermark (LOW + slack)
/// wakes the demotion daemon in the engine.
#[derive(Debug, Clone)]
pub struct MemoryState {
    pub page_size: u64,
    pub local_alloc: u64,
    pub local_used: u64,
    pub remote_used: u64,
    pub low_watermark: u64,
    pub high_watermark: u64,
    pub peak_local_used: u64,
    pub peak_remote_used: u64,
    pages: Vec<PageRecord>,
    lru: LruList,
}

impl MemoryState {
    pub fn new(
        n_pages: u64,
        page_size: u64,
        local_alloc: u64,
        placement: InitialPlacement,
    ) -> Result<Self> {
        Self::with_slack(
            n_pages,
            page_size,
            local_alloc,
            placement,
            DEFAULT_SLACK_BYTES,
        )
    }

    pub fn with_slack(
        n_pages: u64,
        page_size: u64,
        local_alloc: u64,
        placement: InitialPlacement,
        slack_bytes: u64,
    ) -> Result<Self> {
        if page_size == 0 {
            return Err(Error::ZeroPageSize);
        }
        if placement == InitialPlacement::FillLocalThenRemote && local_alloc < page_size {
            return Err(Error::AllocTooSmall {
                alloc: local_alloc,
                page_size,
            });
        }

        let n = n_pages as usize;
        let local_count = match placement {
            InitialPlacement::AllRemote => 0,
            InitialPlacement::FillLocalThenRemote => (local_alloc / page_size).min(n_pages),
        };

        let mut pages = Vec::with_capacity(n);
        let mut lru = LruList::new(n);
        for id in 0..n_pages {
            let location = if id < local_count {
                Location::Local
            } else {
                Location::Remote
            };
            pages.push(PageRecord::new(id, location));
        }
        // Seed the recency list in id order: page 0 ends up at the tail.
        for id in 0..local_count as usize {
            lru.push_front(id);
        }

        let local_used = local_count * page_size;
        let remote_used = (n_pages - local_count) * page_size;
        Ok(Self {
            page_size,
            local_alloc,
            local_used,
            remote_used,
            low_watermark: local_alloc,
            high_watermark: local_alloc + slack_bytes,
            peak_local_used: local_used,
            peak_remote_used: remote_used,
            pages,
            lru,
        })
    }

    pub fn n_pages(&self) -> u64 {
        self.pages.len() as u64
    }

    pub fn local_page_count(&self) -> usize {
        self.lru.len
    }

    pub fn working_set_bytes(&self) -> u64 {
        self.n_pages() * self.page_size
    }

    pub fn page(&self, id: PageId) -> Result<&PageRecord> {
        self.pages.get(id as usize).ok_or(Error::UnknownPage(id))
    }

    pub fn page_mut(&mut self, id: PageId) -> Result<&mut PageRecord> {
        self.pages
            .get_mut(id as usize)
            .ok_or(Error::UnknownPage(id))
    }

    pub fn pages(&self) -> impl Iterator<Item = &PageRecord> {
        self.pages.iter()
    }

    pub fn pages_mut(&mut self) -> impl Iterator<Item = &mut PageRecord> {
        self.pages.iter_mut()
    }

    pub fn local_pages(&self) -> impl Iterator<Item = &PageRecord> + '_ {
        self.pages.iter().filter(|p| p.location == Location::Local)
    }

    pub fn remote_pages(&self) -> impl Iterator<Item = &PageRecord> + '_ {
        self.pages.iter().filter(|p| p.location == Location::Remote)
    }

    /// Whether a one-way promotion fits under the LOW watermark.
    pub fn can_fit_promotion(&self) -> bool {
        self.local_used + self.page_size <= self.low_watermark
    }

    /// Records an access for recency. Local pages move to the LRU head;
    /// remote pages update recency without joining the list.
    pub fn record_access(&mut self, id: PageId, now_ns: f64) -> Result<()> {
        let idx = id as usize;
        let page = self.pages.get_mut(idx).ok_or(Error::UnknownPage(id))?;
        page.last_access_ns = Some(now_ns);
        if page.location == Location::Local {
            self.lru.touch(idx);
        }
        Ok(())
    }

    /// Demotion candidates from the LRU tail, least recent first, enough to
    /// free `bytes_needed`. Within a run of equal recency the page with the
    /// lower EWMA rate goes first. Returns every local page if the total
    /// falls short; never returns a remote page.
    pub fn demotion_candidates(&self, bytes_needed: u64) -> Vec<PageId> {
        let mut out: Vec<PageId> = Vec::new();
        let mut freed = 0u64;
        let mut iter = self.lru.iter_from_tail().peekable();
        while freed < bytes_needed {
            let Some(first) = iter.next() else { break };
            // Gather the tie group sharing this recency timestamp.
            let stamp = self.pages[first].last_access_ns;
            let mut group = vec![first];
            while let Some(&next) = iter.peek() {
                if self.pages[next].last_access_ns == stamp {
                    group.push(next);
                    iter.next();
                } else {
                    break;
                }
            }
            group.sort_by(|&a, &b| {
                let ra = self.pages[a].ewma_rate.unwrap_or(0.0);
                let rb = self.pages[b].ewma_rate.unwrap_or(0.0);
                ra.partial_cmp(&rb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            for idx in group {
                out.push(idx as PageId);
                freed += self.page_size;
                if freed >= bytes_needed {
                    break;
                }
            }
        }
        out
    }

    /// EWMA rate of the page next in line for demotion; 0 when the local
    /// node is empty.
    pub fn top_demotion_rate(&self) -> f64 {
        self.demotion_candidates(1)
            .first()
            .and_then(|&id| self.pages[id as usize].ewma_rate)
            .unwrap_or(0.0)
    }

    /// Exchanges a remote page into local memory, optionally demoting a
    /// local victim in the same step. Without a victim the promotion must
    /// fit under the LOW watermark.
    pub fn apply_swap(&mut self, promote: PageId, demote: Option<PageId>) -> Result<()> {
        if Some(promote) == demote {
            return Err(Error::SamePage(promote));
        }
        let promote_idx = promote as usize;
        if promote_idx >= self.pages.len() {
            return Err(Error::UnknownPage(promote));
        }
        if self.pages[promote_idx].location != Location::Remote {
            return Err(Error::WrongLocation {
                page: promote,
                expected: "remote",
                found: "local",
            });
        }
        if let Some(demote) = demote {
            let demote_idx = demote as usize;
            if demote_idx >= self.pages.len() {
                return Err(Error::UnknownPage(demote));
            }
            if self.pages[demote_idx].location != Location::Local {
                return Err(Error::WrongLocation {
                    page: demote,
                    expected: "local",
                    found: "remote",
                });
            }
            self.demote_inner(demote_idx);
        } else if self.local_used + self.page_size > self.low_watermark {
            return Err(Error::WatermarkViolation {
                page: promote,
                used: self.local_used,
                page_size: self.page_size,
                limit: self.low_watermark,
            });
        }

        self.pages[promote_idx].location = Location::Local;
        self.lru.push_front(promote_idx);
        self.local_used += self.page_size;
        self.remote_used -= self.page_size;
        self.peak_local_used = self.peak_local_used.max(self.local_used);
        Ok(())
    }

    /// Demotes one local page to the remote pool (the daemon path).
    pub fn demote_page(&mut self, id: PageId) -> Result<()> {
        let idx = id as usize;
        if idx >= self.pages.len() {
            return Err(Error::UnknownPage(id));
        }
        if self.pages[idx].location != Location::Local {
            return Err(Error::WrongLocation {
                page: id,
                expected: "local",
                found: "remote",
            });
        }
        self.demote_inner(idx);
        Ok(())
    }

    fn demote_inner(&mut self, idx: usize) {
        self.pages[idx].location = Location::Remote;
        self.lru.remove(idx);
        self.local_used -= self.page_size;
        self.remote_used += self.page_size;
        self.peak_remote_used = self.peak_remote_used.max(self.remote_used);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_arithmetic() {
        let mem = MemoryState::new(4, 4096, 8192, InitialPlacement::FillLocalThenRemote).unwrap();
        assert_eq!(mem.local_page_count(), 2);
        assert_eq!(mem.local_used, 8192);
        assert_eq!(mem.remote_used, 8192);

        let mem = MemoryState::new(4, 4096, 8192, InitialPlacement::AllRemote).unwrap();
        assert_eq!(mem.local_page_count(), 0);
        assert_eq!(mem.local_used, 0);

        // 10% allocation: 10 local, 90 remote.
        let mem =
            MemoryState::new(100, 4096, 40960, InitialPlacement::FillLocalThenRemote).unwrap();
        assert_eq!(mem.local_page_count(), 10);
        assert_eq!(mem.remote_pages().count(), 90);
    }

    #[test]
    fn init_errors() {
        assert!(MemoryState::new(4, 0, 8192, InitialPlacement::AllRemote).is_err());
        assert!(MemoryState::new(4, 4096, 1024, InitialPlacement::FillLocalThenRemote).is_err());
        assert!(MemoryState::new(4, 4096, 1024, InitialPlacement::AllRemote).is_ok());
    }

    #[test]
    fn recency_ordering() {
        let mut mem =
            MemoryState::new(10, 4096, 40960, InitialPlacement::FillLocalThenRemote).unwrap();
        mem.record_access(7, 5e9).unwrap();
        assert_eq!(mem.demotion_candidates(10 * 4096).last(), Some(&7));

        mem.record_access(3, 6e9).unwrap();
        mem.record_access(9, 7e9).unwrap();
        let order = mem.demotion_candidates(10 * 4096);
        assert_eq!(&order[order.len() - 3..], &[7, 3, 9]);
    }

    #[test]
    fn remote_access_does_not_join_lru() {
        let mut mem =
            MemoryState::new(4, 4096, 8192, InitialPlacement::FillLocalThenRemote).unwrap();
        mem.record_access(3, 1e9).unwrap();
        assert_eq!(mem.page(3).unwrap().last_access_ns, Some(1e9));
        assert_eq!(mem.local_page_count(), 2);
        assert!(!mem.demotion_candidates(8192).contains(&3));
    }

    #[test]
    fn demotion_candidates_tail_then_rate() {
        let mut mem =
            MemoryState::new(4, 4096, 16384, InitialPlacement::FillLocalThenRemote).unwrap();
        // Give p4-style semantics: pages 0 and 1 share a recency stamp with
        // different EWMA rates, pages 2 and 3 are fresher.
        mem.record_access(0, 1e9).unwrap();
        mem.record_access(1, 1e9).unwrap();
        mem.record_access(2, 2e9).unwrap();
        mem.record_access(3, 3e9).unwrap();
        mem.page_mut(0).unwrap().ewma_rate = Some(3.0);
        mem.page_mut(1).unwrap().ewma_rate = Some(0.1);

        assert_eq!(mem.demotion_candidates(4096), vec![1]);
        assert_eq!(mem.demotion_candidates(8192), vec![1, 0]);
        assert_eq!(mem.demotion_candidates(16384), vec![1, 0, 2, 3]);
        // Asking for more than exists returns everything local.
        assert_eq!(mem.demotion_candidates(1 << 30).len(), 4);

        let empty = MemoryState::new(4, 4096, 8192, InitialPlacement::AllRemote).unwrap();
        assert!(empty.demotion_candidates(4096).is_empty());
    }

    #[test]
    fn swap_exchanges_locations() {
        let mut mem =
            MemoryState::new(4, 4096, 8192, InitialPlacement::FillLocalThenRemote).unwrap();
        mem.apply_swap(2, Some(0)).unwrap();
        assert_eq!(mem.page(2).unwrap().location, Location::Local);
        assert_eq!(mem.page(0).unwrap().location, Location::Remote);
        assert_eq!(mem.local_used, 8192);
        assert_eq!(mem.local_used + mem.remote_used, 4 * 4096);
    }

    #[test]
    fn one_way_promotion_respects_watermark() {
        let mut mem =
            MemoryState::new(4, 4096, 12288, InitialPlacement::FillLocalThenRemote).unwrap();
        assert_eq!(mem.local_page_count(), 3);
        // Local is at the allocation: promotion without demotion must fail.
        assert!(matches!(
            mem.apply_swap(3, None),
            Err(Error::WatermarkViolation { .. })
        ));

        let mut mem = MemoryState::new(4, 4096, 12288, InitialPlacement::AllRemote).unwrap();
        mem.apply_swap(1, None).unwrap();
        assert_eq!(mem.local_used, 4096);
        assert_eq!(mem.peak_local_used, 4096);
    }

    #[test]
    fn swap_rejects_same_page_and_wrong_locations() {
        let mut mem =
            MemoryState::new(4, 4096, 8192, InitialPlacement::FillLocalThenRemote).unwrap();
        assert!(matches!(
            mem.apply_swap(2, Some(2)),
            Err(Error::SamePage(2))
        ));
        assert!(mem.apply_swap(0, Some(1)).is_err()); // promote target is local
        assert!(mem.apply_swap(2, Some(3)).is_err()); // victim is remote
        assert!(matches!(
            mem.apply_swap(99, None),
            Err(Error::UnknownPage(99))
        ));
    }

    #[test]
    fn conservation_under_random_events() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 32u64;
        let page = 4096u64;
        let mut mem =
            MemoryState::new(n, page, 8 * page, InitialPlacement::FillLocalThenRemote).unwrap();
        for step in 0..2000 {
            let id = rng.random_range(0..n);
            match rng.random_range(0..3) {
                0 => mem.record_access(id, step as f64).unwrap(),
                1 => {
                    if mem.page(id).unwrap().location == Location::Remote {
                        let victim = mem.demotion_candidates(page).first().copied();
                        let _ = mem.apply_swap(id, victim);
                    }
                }
                _ => {
                    if mem.page(id).unwrap().location == Location::Local {
                        mem.demote_page(id).unwrap();
                    }
                }
            }
            assert_eq!(mem.local_used + mem.remote_used, n * page);
            assert!(mem.local_used <= mem.local_alloc);
            for cand in mem.demotion_candidates(4 * page) {
                assert_eq!(mem.page(cand).unwrap().location, Location::Local);
            }
        }
    }

    #[test]
    fn watermark_fields_derive_from_alloc_and_slack() {
        let mem = MemoryState::with_slack(
            100,
            4096,
            40960,
            InitialPlacement::FillLocalThenRemote,
            8192,
        )
        .unwrap();
        assert_eq!(mem.low_watermark, 40960);
        assert_eq!(mem.high_watermark, 40960 + 8192);
    }
}
