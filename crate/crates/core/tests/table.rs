use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use cuckoo_trie::entry::{Entry, Locator, Node, RecordRef};
use cuckoo_trie::hash::{HashParams, HashValue};
use cuckoo_trie::table::{RelocateError, Table, WriteTxn, SLOTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture_table() -> Table {
    let mut m = vec![3u64; 16];
    m[0] = 7;
    m[1] = 0;
    Table::with_params(HashParams::with_displacements(1024, m).unwrap())
}

fn leaf(last: u8, parent_color: u8, record: u64) -> Entry {
    Entry::new(
        last,
        parent_color,
        false,
        Node::Leaf {
            record: RecordRef(record),
            next: None,
        },
    )
}

fn put(table: &Table, h: HashValue, e: Entry) -> Locator {
    let mut txn = WriteTxn::empty(table);
    let color = txn.insert(h, e).unwrap();
    txn.commit();
    Locator::new(h, color)
}

fn record_of(table: &Table, loc: Locator) -> u64 {
    match table.resolve(Some(loc)).unwrap().entry.node {
        Node::Leaf { record, .. } => record.0,
        _ => panic!(),
    }
}

#[test]
fn empty_table_has_only_the_root() {
    let t = fixture_table();
    assert!(t.entries_for(HashValue(2560)).is_empty());
    assert_eq!(t.occupied(), 1);
    assert!(t.resolve(None).is_none());
    assert!(t.resolve(Some(Locator::ROOT)).unwrap().entry.is_root());
}

#[test]
fn first_placement_is_primary_with_color_zero() {
    let t = fixture_table();
    let loc = put(&t, HashValue(2560), leaf(5, 0, 1));
    assert_eq!(loc.color, 0);
    let found = t.entries_for(HashValue(2560));
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].bucket, 160);
    assert!(found[0].entry.is_primary);
    assert_eq!(t.search_by_parent(HashValue(2560), 5, 0).unwrap().bucket, 160);
    assert!(t.search_by_parent(HashValue(2560), 5, 1).is_none());
    assert!(t.search_by_parent(HashValue(2560), 6, 0).is_none());
    assert!(t.search_by_color(HashValue(2560), 5, 0).is_some());
    assert!(t.search_by_color(HashValue(2560), 5, 2).is_none());
}

#[test]
fn same_hash_entries_get_distinct_colors() {
    let t = fixture_table();
    let a = put(&t, HashValue(2560), leaf(5, 0, 1));
    let b = put(&t, HashValue(2560), leaf(7, 0, 2));
    assert_eq!((a.color, b.color), (0, 1));
    assert_eq!(t.entries_for(HashValue(2560)).len(), 2);
    assert_eq!(record_of(&t, a), 1);
    assert_eq!(record_of(&t, b), 2);
    // the root owns color 0 of hash 0
    let c = put(&t, HashValue(0), leaf(0, 0, 3));
    assert_eq!(c.color, 1);
}

#[test]
fn full_primary_bucket_spills_and_everything_stays_findable() {
    let t = fixture_table();
    // five hashes sharing primary bucket 200, tags 2..=6 (displacement 3)
    let locs: Vec<Locator> = (2..7u64)
        .map(|tag| put(&t, HashValue(200 * 16 + tag), leaf(1, 0, tag)))
        .collect();
    let in_primary = t.read_bucket(200).0.entries().count();
    assert_eq!(in_primary, SLOTS);
    for (tag, loc) in (2..7u64).zip(&locs) {
        assert_eq!(record_of(&t, *loc), tag);
    }
    let moved: Vec<_> = locs
        .iter()
        .map(|l| t.resolve(Some(*l)).unwrap())
        .filter(|r| !r.entry.is_primary)
        .collect();
    assert_eq!(moved.len(), 1);
    assert_eq!(moved[0].bucket, 203);
}

#[test]
fn relocation_keeps_locators_and_parent_links() {
    let t = fixture_table();
    let loc = put(&t, HashValue(2560), leaf(5, 4, 9));
    let r = t.resolve(Some(loc)).unwrap();
    let dest = t.relocate_one(r.bucket, r.slot).unwrap();
    assert_eq!(dest, 167);
    let r2 = t.resolve(Some(loc)).unwrap();
    assert_eq!(r2.bucket, 167);
    assert!(!r2.entry.is_primary);
    assert_eq!(t.hash_of(&r2), HashValue(2560));
    assert!(t.search_by_parent(HashValue(2560), 5, 4).is_some());
    t.relocate_one(r2.bucket, r2.slot).unwrap();
    let r3 = t.resolve(Some(loc)).unwrap();
    assert_eq!(r3.bucket, 160);
    assert!(r3.entry.is_primary);
    assert_eq!(record_of(&t, loc), 9);
}

#[test]
fn root_and_zero_displacement_cannot_move() {
    let t = fixture_table();
    assert_eq!(t.relocate_one(0, 0), Err(RelocateError::NotMovable));
    // tag 1 has displacement 0: both choices are the same bucket
    let loc = put(&t, HashValue(16 * 9 + 1), leaf(2, 0, 0));
    let r = t.resolve(Some(loc)).unwrap();
    assert_eq!(t.relocate_one(r.bucket, r.slot), Err(RelocateError::DestinationFull));
}

#[test]
fn shadow_map_under_random_fill_and_relocation() {
    let t = Table::new(256, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut shadow: HashMap<Locator, u64> = HashMap::new();
    let target = 256 * SLOTS * 85 / 100;
    let space = t.params().space();
    let mut n = 0u64;
    while shadow.len() < target {
        let h = HashValue(rng.gen_range(1..space));
        let loc = put(&t, h, leaf(rng.gen_range(0..32), 0, n));
        shadow.insert(loc, n);
        n += 1;
    }
    for _ in 0..2000 {
        let b = rng.gen_range(0..256);
        let s = rng.gen_range(0..SLOTS);
        let _ = t.relocate_one(b, s);
    }
    for (loc, rec) in &shadow {
        assert_eq!(record_of(&t, *loc), *rec);
    }
    // tags and roles reproduce each entry's hash
    for e in t.scan_entries() {
        let h = t.hash_of(&e);
        let (b1, b2) = t.params().buckets_for(h);
        assert_eq!(if e.entry.is_primary { b1 } else { b2 }, e.bucket);
    }
}

#[test]
fn lock_buckets_all_or_nothing() {
    let t = fixture_table();
    let v: Vec<u32> = [3, 5, 9].iter().map(|&b| t.version(b)).collect();
    let txn = t.lock_buckets(&[(5, v[1]), (3, v[0]), (9, v[2])]).unwrap();
    assert!([3, 5, 9].iter().all(|&b| t.version(b) % 2 == 1));
    txn.commit();
    assert_eq!(t.version(3), v[0] + 2);
    assert_eq!(t.version(9), v[2] + 2);
    // one stale expectation: nothing stays locked
    let stale = t.lock_buckets(&[(3, v[0] + 2), (5, v[1]), (9, v[2] + 2)]);
    assert!(stale.is_err());
    assert_eq!(t.version(3), v[0] + 2);
    assert_eq!(t.version(5), v[1] + 2);
    assert_eq!(t.version(9), v[2] + 2);
    // dropped without commit: versions restored
    drop(t.lock_buckets(&[(3, v[0] + 2)]).unwrap());
    assert_eq!(t.version(3), v[0] + 2);
}

#[test]
fn reader_waits_for_parked_writer() {
    let t = fixture_table();
    let loc = put(&t, HashValue(2560), leaf(5, 0, 1));
    let bucket = t.resolve(Some(loc)).unwrap().bucket;
    let v = t.version(bucket);
    let mut txn = t.lock_buckets(&[(bucket, v)]).unwrap();
    let done = AtomicBool::new(false);
    std::thread::scope(|s| {
        let reader = s.spawn(|| {
            let (records, version) = t.read_consistent(bucket, |img| {
                img.entries()
                    .filter_map(|(_, e)| match e.node {
                        Node::Leaf { record, .. } => Some(record.0),
                        _ => None,
                    })
                    .collect::<Vec<_>>()
            });
            (records, version, done.load(Ordering::SeqCst))
        });
        std::thread::sleep(Duration::from_millis(50));
        txn.modify(loc, |e| {
            if let Node::Leaf { record, .. } = &mut e.node {
                *record = RecordRef(2);
            }
        });
        done.store(true, Ordering::SeqCst);
        txn.commit();
        let (records, version, after) = reader.join().unwrap();
        assert!(after, "reader returned while the bucket was locked");
        assert_eq!(records, vec![2]);
        assert_eq!(version, v + 2);
    });
}

#[test]
fn torn_reads_are_never_returned() {
    // every write keeps the two records of a bucket equal
    let t = fixture_table();
    let a = put(&t, HashValue(2560), leaf(5, 0, 0));
    let b = put(&t, HashValue(2560), leaf(6, 0, 0));
    let bucket = t.resolve(Some(a)).unwrap().bucket;
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        s.spawn(|| {
            for i in 1..5000u64 {
                let mut txn = loop {
                    if let Ok(txn) = t.lock_buckets(&[(bucket, t.version(bucket))]) {
                        break txn;
                    }
                };
                for loc in [a, b] {
                    txn.modify(loc, |e| {
                        if let Node::Leaf { record, .. } = &mut e.node {
                            *record = RecordRef(i);
                        }
                    });
                }
                txn.commit();
            }
            stop.store(true, Ordering::SeqCst);
        });
        while !stop.load(Ordering::SeqCst) {
            let (pair, _) = t.read_consistent(bucket, |img| {
                let r: Vec<u64> = img
                    .entries()
                    .filter_map(|(_, e)| match e.node {
                        Node::Leaf { record, .. } => Some(record.0),
                        _ => None,
                    })
                    .collect();
                r
            });
            assert_eq!(pair.len(), 2);
            assert_eq!(pair[0], pair[1]);
        }
    });
}
