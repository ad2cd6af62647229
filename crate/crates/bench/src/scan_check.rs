//! Range scans checked against a reference map while a writer churns other
//! keys.

use std::collections::{BTreeMap, HashSet};
use std::ops::Bound;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use cuckoo_trie::{Config, CuckooTrie};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::differential::key_space;

#[derive(Clone, Debug)]
pub struct ScanStressConfig {
    pub scans: usize,
    pub max_len: usize,
    /// Keys inserted first and never touched again.
    pub stable_keys: usize,
    /// Keys the background writer inserts and deletes.
    pub volatile_keys: usize,
    pub buckets: usize,
    pub seed: u64,
    pub prefetch_depth: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ScanStressReport {
    pub scans: usize,
    pub writer_ops: u64,
    pub failures: Vec<String>,
}

/// Each scan must be strictly increasing, start at or after its start key,
/// contain only known keys, and contain every stable key up to the last key
/// it returned (or to the end when it returned fewer than asked).
pub fn scan_stress(cfg: &ScanStressConfig) -> ScanStressReport {
    let trie = CuckooTrie::with_config(Config::new(cfg.buckets, cfg.seed).prefetch_depth(cfg.prefetch_depth))
        .expect("valid bucket count");
    let keys = key_space(cfg.stable_keys + cfg.volatile_keys, cfg.seed);
    let (stable, volatile) = keys.split_at(cfg.stable_keys);
    let mut model = BTreeMap::new();
    for (i, k) in stable.iter().enumerate() {
        trie.insert(k, i as u64).unwrap();
        model.insert(k.clone(), i as u64);
    }
    let volatile_set: HashSet<&[u8]> = volatile.iter().map(Vec::as_slice).collect();
    let done = AtomicBool::new(false);
    let writer_ops = AtomicU64::new(0);
    let mut report = ScanStressReport {
        scans: cfg.scans,
        ..ScanStressReport::default()
    };

    std::thread::scope(|s| {
        s.spawn(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x77);
            while !done.load(Ordering::Relaxed) {
                let k = &volatile[rng.gen_range(0..volatile.len())];
                if rng.gen_bool(0.5) {
                    trie.insert(k, u64::MAX).unwrap();
                } else {
                    trie.delete(k).unwrap();
                }
                writer_ops.fetch_add(1, Ordering::Relaxed);
            }
        });
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ca7);
        for n in 0..cfg.scans {
            let start: Vec<u8> = if rng.gen_bool(0.5) {
                keys[rng.gen_range(0..keys.len())].clone()
            } else {
                rng.gen::<u64>().to_be_bytes().to_vec()
            };
            let len = rng.gen_range(1..=cfg.max_len);
            let got: Vec<(Vec<u8>, u64)> = trie
                .scan(&start, len)
                .into_iter()
                .map(|r| (r.key().to_vec(), r.value()))
                .collect();
            if let Some(msg) = check_scan(&model, &volatile_set, &start, len, &got) {
                report.failures.push(format!("scan {n} from {start:02x?} len {len}: {msg}"));
                if report.failures.len() >= 10 {
                    break;
                }
            }
        }
        done.store(true, Ordering::Relaxed);
    });
    report.writer_ops = writer_ops.load(Ordering::Relaxed);
    if let Err(e) = trie.check_invariants() {
        report.failures.push(format!("invariants: {e}"));
    }
    report
}

fn check_scan(
    model: &BTreeMap<Vec<u8>, u64>,
    volatile: &HashSet<&[u8]>,
    start: &[u8],
    len: usize,
    got: &[(Vec<u8>, u64)],
) -> Option<String> {
    if got.len() > len {
        return Some(format!("{} items", got.len()));
    }
    if got.first().is_some_and(|(k, _)| k.as_slice() < start) {
        return Some("first key below start".into());
    }
    if got.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Some("keys not strictly increasing".into());
    }
    for (k, v) in got {
        match model.get(k) {
            Some(mv) if mv != v => return Some(format!("stable key {k:02x?} has value {v}")),
            Some(_) => {}
            None if volatile.contains(k.as_slice()) => {}
            None => return Some(format!("unknown key {k:02x?}")),
        }
    }
    let upper = match got.last() {
        Some((k, _)) if got.len() == len => Bound::Included(k.clone()),
        _ => Bound::Unbounded,
    };
    let expected: Vec<&Vec<u8>> = model
        .range::<Vec<u8>, _>((Bound::Included(start.to_vec()), upper))
        .map(|(k, _)| k)
        .collect();
    let seen: Vec<&Vec<u8>> = got.iter().map(|(k, _)| k).filter(|k| model.contains_key(*k)).collect();
    (expected != seen).then(|| format!("stable keys {} expected, {} returned", expected.len(), seen.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_run_passes() {
        let r = scan_stress(&ScanStressConfig {
            scans: 500,
            max_len: 100,
            stable_keys: 2000,
            volatile_keys: 2000,
            buckets: CuckooTrie::buckets_for_keys(4000, 0.8),
            seed: 4,
            prefetch_depth: 5,
        });
        assert!(r.failures.is_empty(), "{:?}", r.failures);
    }

    #[test]
    fn checker_rejects_a_missing_stable_key() {
        let mut model = BTreeMap::new();
        for k in [1u8, 2, 3] {
            model.insert(vec![k], k as u64);
        }
        let volatile = HashSet::new();
        let ok = vec![(vec![1u8], 1u64), (vec![2], 2)];
        assert!(check_scan(&model, &volatile, &[0], 2, &ok).is_none());
        let missing = vec![(vec![1u8], 1u64), (vec![3], 3)];
        assert!(check_scan(&model, &volatile, &[0], 2, &missing).is_some());
        let short = vec![(vec![1u8], 1u64), (vec![2], 2)];
        assert!(check_scan(&model, &volatile, &[0], 5, &short).is_some());
        let unordered = vec![(vec![2u8], 2u64), (vec![1], 1)];
        assert!(check_scan(&model, &volatile, &[0], 2, &unordered).is_some());
    }
}
