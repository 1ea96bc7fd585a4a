//! High-water-mark accounting for the pipeline's tensor arena.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tracks live bytes and their high-water mark since the last reset.
///
/// Counters are atomic so stages running on worker threads can record
/// allocations concurrently.
#[derive(Debug, Default)]
pub struct MemoryTracker {
    current: AtomicU64,
    peak: AtomicU64,
}

impl MemoryTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&self, bytes: u64) {
        let prev = self.current.fetch_add(bytes, Ordering::SeqCst);
        self.peak.fetch_max(prev + bytes, Ordering::SeqCst);
    }

    pub fn free(&self, bytes: u64) -> Result<()> {
        self.current
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |c| c.checked_sub(bytes))
            .map(|_| ())
            .map_err(|current| {
                Error::Accounting(format!(
                    "free of {bytes} bytes exceeds {current} live bytes"
                ))
            })
    }

    /// Restarts high-water tracking from the current live byte count.
    pub fn reset_peak(&self) {
        self.peak
            .store(self.current.load(Ordering::SeqCst), Ordering::SeqCst);
    }

    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn current(&self) -> u64 {
        self.current.load(Ordering::SeqCst)
    }

    /// Records `bytes` as live until the returned guard is dropped.
    pub fn reserve(self: &Arc<Self>, bytes: usize) -> Reservation {
        self.alloc(bytes as u64);
        Reservation {
            tracker: Arc::clone(self),
            bytes: bytes as u64,
        }
    }
}

/// Live allocation recorded in a [`MemoryTracker`]; freed on drop.
#[derive(Debug)]
pub struct Reservation {
    tracker: Arc<MemoryTracker>,
    bytes: u64,
}

impl Reservation {
    pub fn bytes(&self) -> u64 {
        self.bytes
    }
}

impl Drop for Reservation {
    fn drop(&mut self) {
        // Reservations only ever free what they allocated.
        let _ = self.tracker.free(self.bytes);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MB: u64 = 1_000_000;

    #[test]
    fn peak_examples() {
        let t = MemoryTracker::new();
        t.alloc(100 * MB);
        t.free(100 * MB).unwrap();
        t.alloc(50 * MB);
        assert_eq!(t.peak(), 100 * MB);

        let t = MemoryTracker::new();
        t.alloc(100 * MB);
        t.free(100 * MB).unwrap();
        t.reset_peak();
        t.alloc(50 * MB);
        assert_eq!(t.peak(), 50 * MB);
    }

    #[test]
    fn over_free_is_an_error() {
        let t = MemoryTracker::new();
        t.alloc(10);
        assert!(matches!(t.free(11), Err(Error::Accounting(_))));
        assert_eq!(t.current(), 10);
    }

    #[test]
    fn reservation_frees_on_drop() {
        let t = Arc::new(MemoryTracker::new());
        {
            let _a = t.reserve(64);
            let _b = t.reserve(32);
            assert_eq!(t.current(), 96);
        }
        assert_eq!(t.current(), 0);
        assert_eq!(t.peak(), 96);
    }

    #[test]
    fn concurrent_updates_balance() {
        let t = Arc::new(MemoryTracker::new());
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    for _ in 0..1000 {
                        let _r = t.reserve(16);
                    }
                });
            }
        });
        assert_eq!(t.current(), 0);
        assert!(t.peak() >= 16 && t.peak() <= 8 * 16);
    }

    proptest! {
        #[test]
        fn peak_matches_replay(script in prop::collection::vec((any::<bool>(), 1u64..1000), 1..200)) {
            let t = MemoryTracker::new();
            let (mut current, mut peak) = (0u64, 0u64);
            for (is_alloc, bytes) in script {
                if is_alloc {
                    t.alloc(bytes);
                    current += bytes;
                    peak = peak.max(current);
                } else if bytes <= current {
                    t.free(bytes).unwrap();
                    current -= bytes;
                } else {
                    prop_assert!(t.free(bytes).is_err());
                }
                prop_assert!(t.peak() >= t.current());
            }
            prop_assert_eq!(t.peak(), peak);
            prop_assert_eq!(t.current(), current);
        }
    }
}
