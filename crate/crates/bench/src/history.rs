//! Multi-threaded stress runs whose lookups are checked against the history
//! of the writes.
//!
//! Every key belongs to exactly one writer, so its writes form a sequence.
//! Each operation is stamped with a global counter before it starts and
//! after it returns. A lookup is acceptable if it returned a state the key
//! could have had at some instant between its two stamps.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use cuckoo_trie::{Config, CuckooTrie, DeleteOutcome, InsertOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct StressConfig {
    pub writers: usize,
    pub readers: usize,
    /// Operations over all threads.
    pub ops: usize,
    pub key_space: usize,
    pub buckets: usize,
    pub seed: u64,
    pub prefetch_depth: usize,
}

#[derive(Clone, Debug, Default)]
pub struct StressReport {
    pub ops: usize,
    pub lookups_checked: usize,
    /// Lookups whose answer no instant of their execution explains.
    pub violations: Vec<String>,
    /// Keys whose final state differs from the last write.
    pub lost_updates: usize,
    pub invariant_error: Option<String>,
}

impl StressReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.lost_updates == 0 && self.invariant_error.is_none()
    }
}

struct Write {
    start: u64,
    end: u64,
    state: Option<u64>,
}

struct Read {
    key: usize,
    start: u64,
    end: u64,
    seen: Option<u64>,
}

fn key_bytes(i: usize) -> [u8; 8] {
    // spread indices over the key space so keys share prefixes unevenly
    ((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) & 0xffff_0000_ffff_ffff).to_be_bytes()
}

/// Value written by writer `w` in its `n`-th write.
fn value(w: usize, n: u64) -> u64 {
    ((w as u64) << 48) | n
}

pub fn stress(cfg: &StressConfig) -> StressReport {
    let trie = CuckooTrie::with_config(Config::new(cfg.buckets, cfg.seed).prefetch_depth(cfg.prefetch_depth))
        .expect("valid bucket count");
    let clock = AtomicU64::new(0);
    let threads = cfg.writers + cfg.readers;
    let per_thread = cfg.ops / threads;
    let keys: Vec<[u8; 8]> = (0..cfg.key_space).map(key_bytes).collect();
    let tick = || clock.fetch_add(1, Ordering::SeqCst);

    let (writes, reads) = std::thread::scope(|s| {
        let writer_handles: Vec<_> = (0..cfg.writers)
            .map(|w| {
                let (trie, keys, tick) = (&trie, &keys, &tick);
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (w as u64 * 7919 + 1));
                    let mine: Vec<usize> = (w..cfg.key_space).step_by(cfg.writers).collect();
                    let mut state: Vec<Option<u64>> = vec![None; mine.len()];
                    let mut log: HashMap<usize, Vec<Write>> = HashMap::new();
                    for n in 0..per_thread as u64 {
                        let slot = rng.gen_range(0..mine.len());
                        let k = mine[slot];
                        let start = tick();
                        let new = match state[slot] {
                            Some(_) if rng.gen_bool(0.5) => {
                                let r = trie.delete(&keys[k]).unwrap();
                                assert_eq!(r, DeleteOutcome::Deleted, "own key vanished");
                                None
                            }
                            Some(_) => {
                                // overwrite in place
                                let v = value(w, n);
                                trie.get(&keys[k]).unwrap().expect("own key vanished").set_value(v);
                                Some(v)
                            }
                            None => {
                                let v = value(w, n);
                                let r = trie.insert(&keys[k], v).unwrap();
                                assert!(matches!(r, InsertOutcome::Inserted(_)), "own key already present");
                                Some(v)
                            }
                        };
                        let end = tick();
                        state[slot] = new;
                        log.entry(k).or_default().push(Write { start, end, state: new });
                    }
                    log
                })
            })
            .collect();
        let reader_handles: Vec<_> = (0..cfg.readers)
            .map(|r| {
                let (trie, keys, tick) = (&trie, &keys, &tick);
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (r as u64 * 104_729 + 17));
                    let mut log = Vec::with_capacity(per_thread);
                    for _ in 0..per_thread {
                        let k = rng.gen_range(0..cfg.key_space);
                        let start = tick();
                        let seen = trie.get(&keys[k]).unwrap().map(|rec| {
                            assert_eq!(rec.key(), keys[k], "record of another key");
                            rec.value()
                        });
                        let end = tick();
                        log.push(Read { key: k, start, end, seen });
                    }
                    log
                })
            })
            .collect();
        let mut writes: HashMap<usize, Vec<Write>> = HashMap::new();
        for h in writer_handles {
            writes.extend(h.join().unwrap());
        }
        let reads: Vec<Read> = reader_handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        (writes, reads)
    });

    let mut report = StressReport {
        ops: per_thread * threads,
        lookups_checked: reads.len(),
        ..StressReport::default()
    };
    let empty = Vec::new();
    for r in &reads {
        let hist = writes.get(&r.key).unwrap_or(&empty);
        if !explained(hist, r) {
            if report.violations.len() < 10 {
                report.violations.push(format!(
                    "key {} read {:?} during [{}, {}]",
                    r.key, r.seen, r.start, r.end
                ));
            } else {
                report.violations.push(String::new());
            }
        }
    }
    for (k, key) in keys.iter().enumerate() {
        let last = writes.get(&k).and_then(|h| h.last()).and_then(|w| w.state);
        let now = trie.get(key).unwrap().map(|r| r.value());
        if now != last {
            report.lost_updates += 1;
        }
    }
    report.invariant_error = trie.check_invariants().err();
    report
}

/// True if some state of `hist` could have been current during the read.
/// State `j` (after write `j`; before any write for `j = -1`) may be visible
/// from the start of write `j` until the end of write `j + 1`.
fn explained(hist: &[Write], r: &Read) -> bool {
    // first state whose visibility extends to the read's start
    let from = hist.partition_point(|w| w.end < r.start);
    // states before index `from` ended before the read started
    let candidates = from.saturating_sub(1)..=hist.len();
    for idx in candidates {
        // idx 0 is the initial absent state, idx j+1 the state after write j
        let (visible_from, state) = match idx {
            0 => (0, None),
            j => (hist[j - 1].start, hist[j - 1].state),
        };
        if visible_from > r.end {
            break;
        }
        let visible_until = hist.get(idx).map_or(u64::MAX, |w| w.end);
        if visible_until >= r.start && state == r.seen {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(start: u64, end: u64, state: Option<u64>) -> Write {
        Write { start, end, state }
    }

    fn r(start: u64, end: u64, seen: Option<u64>) -> Read {
        Read {
            key: 0,
            start,
            end,
            seen,
        }
    }

    #[test]
    fn history_checker_accepts_and_rejects() {
        let h = vec![w(10, 20, Some(1)), w(30, 40, None), w(50, 60, Some(2))];
        assert!(explained(&h, &r(0, 5, None)));
        assert!(!explained(&h, &r(0, 5, Some(1))));
        // overlapping the first write: either state
        assert!(explained(&h, &r(15, 16, None)));
        assert!(explained(&h, &r(15, 16, Some(1))));
        assert!(explained(&h, &r(22, 28, Some(1))));
        assert!(!explained(&h, &r(22, 28, None)));
        assert!(!explained(&h, &r(41, 49, Some(1))));
        assert!(explained(&h, &r(41, 49, None)));
        assert!(explained(&h, &r(25, 45, None)));
        assert!(!explained(&h, &r(61, 70, None)));
        assert!(explained(&h, &r(61, 70, Some(2))));
        assert!(!explained(&h, &r(61, 70, Some(3))));
        assert!(explained(&[], &r(1, 2, None)));
    }

    #[test]
    fn small_stress_run_is_clean() {
        let report = stress(&StressConfig {
            writers: 2,
            readers: 2,
            ops: 40_000,
            key_space: 256,
            buckets: 1022,
            seed: 1,
            prefetch_depth: 5,
        });
        assert!(report.ok(), "{report:?}");
    }
}
