use std::sync::atomic::{AtomicBool, Ordering};

use cuckoo_trie::{CuckooTrie, DeleteOutcome, InsertOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn key(i: u32) -> [u8; 4] {
    // spread keys so that they share prefixes of varying length
    (i.wrapping_mul(0x9e37_79b9) >> 4).to_be_bytes()
}

#[test]
fn disjoint_writers_lose_nothing() {
    let trie = CuckooTrie::new(4094, 1).unwrap();
    let threads = 4u32;
    let per = 2000u32;
    std::thread::scope(|s| {
        for t in 0..threads {
            let trie = &trie;
            s.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(t as u64);
                for i in 0..per {
                    let k = key(i * threads + t);
                    assert!(matches!(trie.insert(&k, i as u64).unwrap(), InsertOutcome::Inserted(_)));
                    // delete and reinsert a random earlier key of ours
                    if i > 0 && rng.gen_bool(0.2) {
                        let j = rng.gen_range(0..i);
                        let old = key(j * threads + t);
                        assert_eq!(trie.delete(&old).unwrap(), DeleteOutcome::Deleted);
                        assert!(trie.get(&old).unwrap().is_none());
                        trie.insert(&old, j as u64).unwrap();
                    }
                    assert_eq!(trie.get(&k).unwrap().unwrap().value(), i as u64);
                }
            });
        }
    });
    trie.check_invariants().unwrap();
    assert_eq!(trie.iter().count(), (threads * per) as usize);
    for i in 0..threads * per {
        assert_eq!(trie.get(&key(i)).unwrap().unwrap().value(), (i / threads) as u64);
    }
}

#[test]
fn readers_see_stable_keys_while_others_churn() {
    let trie = CuckooTrie::new(2046, 2).unwrap();
    // even indices are inserted up front and never touched again
    for i in (0..3000u32).step_by(2) {
        trie.insert(&key(i), i as u64).unwrap();
    }
    let mut stable: Vec<[u8; 4]> = (0..3000u32).step_by(2).map(key).collect();
    stable.sort();
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        s.spawn(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..20_000 {
                let k = key(rng.gen_range(0..1500u32) * 2 + 1);
                if rng.gen_bool(0.5) {
                    trie.insert(&k, 0).unwrap();
                } else {
                    trie.delete(&k).unwrap();
                }
            }
            stop.store(true, Ordering::SeqCst);
        });
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        while !stop.load(Ordering::SeqCst) {
            let i = rng.gen_range(0..stable.len());
            let k = stable[i];
            assert_eq!(trie.get(&k).unwrap().unwrap().key(), k);
            // scans return increasing keys and every stable key in range
            let got: Vec<Vec<u8>> = trie.scan(&k, 40).iter().map(|r| r.key().to_vec()).collect();
            assert!(got.windows(2).all(|w| w[0] < w[1]));
            let last = got.last().unwrap();
            let expect: Vec<&[u8; 4]> = stable[i..].iter().take_while(|s| s.as_slice() <= last.as_slice()).collect();
            for e in expect {
                assert!(got.iter().any(|g| g.as_slice() == e), "scan from {k:?} missed {e:?}");
            }
            if i > 0 {
                let p = trie.predecessor(&k).unwrap().unwrap();
                assert!(p.key() >= stable[i - 1].as_slice() && p.key() < k.as_slice());
            }
        }
    });
    trie.check_invariants().unwrap();
}
