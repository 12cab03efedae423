//! Per-processor chunk memory with salience pruning.

use std::collections::VecDeque;
use std::ops::RangeInclusive;

use crate::chunk::{Chunk, Gist};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Submitted,
    BroadcastReceived,
    LinkReceived,
    InputReceived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRecord {
    pub tick: u64,
    pub kind: RecordKind,
    pub chunk: Chunk,
}

/// Bounded record store. Records are kept in arrival order, which is also
/// tick order.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    records: VecDeque<MemoryRecord>,
    capacity: usize,
    recency_window: u64,
}

impl MemoryStore {
    pub fn new(capacity: usize, recency_window: u64) -> Self {
        assert!(capacity > 0, "memory capacity must be positive");
        Self { records: VecDeque::new(), capacity, recency_window }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.records.iter()
    }

    /// Stores a record, pruning first if the store is full.
    pub fn store(&mut self, tick: u64, kind: RecordKind, chunk: Chunk) {
        if self.records.len() >= self.capacity {
            self.prune(tick);
        }
        self.records.push_back(MemoryRecord { tick, kind, chunk });
    }

    /// Drops records that are neither salient nor recent. Retained: gists
    /// with a salience flag, records whose |weight| is strictly above the
    /// 90th percentile of the store, and records from the last
    /// `recency_window` ticks. If that still leaves the store full, the
    /// oldest records go: unflagged first, then flagged. No-op under
    /// capacity. Returns the retained count.
    pub fn prune(&mut self, now: u64) -> usize {
        if self.records.len() < self.capacity {
            return self.records.len();
        }
        let threshold = top_decile_threshold(self.records.iter().map(|r| r.chunk.weight().abs()));
        let recent_from = now.saturating_sub(self.recency_window.saturating_sub(1));
        let is_recent = |r: &MemoryRecord| r.tick >= recent_from;
        let is_heavy = |r: &MemoryRecord| r.chunk.weight().abs() > threshold;

        self.records
            .retain(|r| r.chunk.gist().is_salient() || is_heavy(r) || is_recent(r));

        // Still full: evict oldest non-recent records, unflagged before flagged,
        // and as a last resort the oldest records of all.
        let passes: [&dyn Fn(&MemoryRecord) -> bool; 3] = [
            &|r| !is_recent(r) && !r.chunk.gist().is_salient(),
            &|r| !is_recent(r),
            &|_| true,
        ];
        for evictable in passes {
            while self.records.len() >= self.capacity {
                match self.records.iter().position(evictable) {
                    Some(i) => {
                        self.records.remove(i);
                    }
                    None => break,
                }
            }
        }
        self.records.len()
    }

    /// Time-ordered gists of retained records with ticks in `range`.
    pub fn story(&self, range: RangeInclusive<u64>) -> Vec<Gist> {
        self.records
            .iter()
            .filter(|r| range.contains(&r.tick))
            .map(|r| r.chunk.gist().clone())
            .collect()
    }
}

/// Nearest-rank 90th percentile.
fn top_decile_threshold(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return f64::INFINITY;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((0.9 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{make_chunk, Modality, Salience};
    use proptest::prelude::*;

    fn plain(tick: u64, w: f64) -> Chunk {
        make_chunk(0, tick, Gist::new([Modality::Vision], format!("frame{tick}")).unwrap(), w).unwrap()
    }

    fn flagged(tick: u64) -> Chunk {
        let g = Gist::with_flags([Modality::Vision], format!("odd{tick}"), [Salience::Surprising]).unwrap();
        make_chunk(0, tick, g, 1.0).unwrap()
    }

    #[test]
    fn flagged_records_survive_pruning() {
        let mut m = MemoryStore::new(100, 32);
        let flagged_ticks = [3, 20, 41, 55, 60];
        for t in 0..100u64 {
            let c = if flagged_ticks.contains(&t) { flagged(t) } else { plain(t, 1.0) };
            m.store(t, RecordKind::Submitted, c);
        }
        assert_eq!(m.len(), 100);
        let kept = m.prune(99);
        // 32 recent records (ticks 68..=99) plus the five flagged ones.
        assert_eq!(kept, 37);
        for t in flagged_ticks {
            assert!(m.records().any(|r| r.tick == t));
        }
    }

    #[test]
    fn equal_weights_keep_only_recent() {
        let mut m = MemoryStore::new(64, 32);
        for t in 0..64u64 {
            m.store(t, RecordKind::Submitted, plain(t, 2.0));
        }
        assert_eq!(m.prune(63), 32);
        assert!(m.records().all(|r| r.tick >= 32));
    }

    #[test]
    fn heavy_records_survive() {
        let mut m = MemoryStore::new(50, 5);
        for t in 0..50u64 {
            m.store(t, RecordKind::Submitted, plain(t, t as f64));
        }
        m.prune(49);
        // Threshold is the 45th smallest |weight| (44); only 45..=49 exceed it,
        // and those are also the recent ones.
        assert_eq!(m.len(), 5);
        let mut m = MemoryStore::new(50, 5);
        for t in 0..50u64 {
            let w = if t == 10 { 1000.0 } else { 1.0 };
            m.store(t, RecordKind::Submitted, plain(t, w));
        }
        m.prune(49);
        assert!(m.records().any(|r| r.tick == 10));
        assert_eq!(m.len(), 6);
    }

    #[test]
    fn under_capacity_is_noop() {
        let mut m = MemoryStore::new(10, 2);
        for t in 0..5u64 {
            m.store(t, RecordKind::Submitted, plain(t, 1.0));
        }
        assert_eq!(m.prune(100), 5);
    }

    #[test]
    fn story_is_ordered_and_skips_pruned() {
        let mut m = MemoryStore::new(8, 2);
        for t in 0..8u64 {
            let c = if t == 1 { flagged(t) } else { plain(t, 1.0) };
            m.store(t, RecordKind::Submitted, c);
        }
        let s = m.story(0..=7);
        assert_eq!(s.len(), 8);
        m.prune(7);
        let s = m.story(0..=7);
        let payloads: Vec<_> = s.iter().map(|g| g.payload().to_owned()).collect();
        assert_eq!(payloads, ["odd1", "frame6", "frame7"]);
        assert!(m.story(2..=5).is_empty());
        assert_eq!(m.story(6..=7).len(), 2);
    }

    proptest! {
        #[test]
        fn never_exceeds_capacity(cap in 1usize..40, window in 1u64..10, n in 0u64..200, seed in 0u64..1000) {
            let mut m = MemoryStore::new(cap, window);
            for t in 0..n {
                let c = if (t * 7 + seed) % 5 == 0 { flagged(t) } else { plain(t, ((t * 13 + seed) % 9) as f64) };
                m.store(t, RecordKind::Submitted, c);
                prop_assert!(m.len() <= cap);
            }
        }

        #[test]
        fn flagged_outlive_unflagged_old(n in 40u64..120) {
            let mut m = MemoryStore::new(40, 4);
            for t in 0..n {
                let c = if t % 10 == 0 { flagged(t) } else { plain(t, 1.0) };
                m.store(t, RecordKind::Submitted, c);
            }
            // Any non-recent unflagged survivor implies every flagged record
            // older than it also survived.
            let now = n - 1;
            let survivors: Vec<_> = m.records().map(|r| (r.tick, r.chunk.gist().is_salient())).collect();
            if let Some(&(oldest_plain, _)) = survivors.iter().find(|(t, s)| !s && t + 4 <= now) {
                for t in (0..oldest_plain).filter(|t| t % 10 == 0) {
                    prop_assert!(survivors.iter().any(|&(s, _)| s == t));
                }
            }
        }
    }
}
