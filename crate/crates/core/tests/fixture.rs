//! The four-key example trie: AB, ACA, BBB, BD.

use cuckoo_trie::entry::Node;
use cuckoo_trie::keycodec::encode_symbols;
use cuckoo_trie::{CuckooTrie, SymbolKey};

const KEYS: [&[u8]; 4] = [b"AB", b"ACA", b"BBB", b"BD"];

fn fixture() -> CuckooTrie {
    let t = CuckooTrie::new(1024, 42).unwrap();
    for (i, k) in KEYS.iter().enumerate() {
        t.insert(k, 100 + i as u64).unwrap();
    }
    t
}

#[test]
fn symbols_of_fixture_keys() {
    assert_eq!(encode_symbols(b"AB"), [8, 5, 1, 0]);
    assert_eq!(encode_symbols(b"ACA"), [8, 5, 1, 20, 2]);
    assert_eq!(encode_symbols(b"BBB"), [8, 9, 1, 4, 4]);
    assert_eq!(encode_symbols(b"BD"), [8, 9, 2, 0]);
}

#[test]
fn lookups() {
    let t = fixture();
    for (i, k) in KEYS.iter().enumerate() {
        assert_eq!(t.get(k).unwrap().unwrap().value(), 100 + i as u64);
    }
    assert!(t.get(b"AC").unwrap().is_none());
    // shares its unique prefix with ACA
    assert!(t.get(b"ACB").unwrap().is_none());
    assert!(t.get(b"B").unwrap().is_none());
}

#[test]
fn search_reaches_leaf() {
    let t = fixture();
    let out = t.search(&SymbolKey::encode(b"AB").unwrap());
    assert!(out.terminal().node.entry.is_leaf());
    // unique prefix of AB against ACA is [8,5,1,0]
    assert_eq!(out.terminal().depth, 4);
    assert_eq!(out.matched_symbols, 4);
}

#[test]
fn shape() {
    let t = fixture();
    t.check_invariants().unwrap();
    let shape = t.logical_trie();
    let names: Vec<(Vec<u8>, bool)> = shape.into_iter().collect();
    assert_eq!(
        names,
        vec![
            (vec![8], false),
            (vec![8, 5], false),
            (vec![8, 5, 1], false),
            (vec![8, 5, 1, 0], true),
            (vec![8, 5, 1, 20], true),
            (vec![8, 9], false),
            (vec![8, 9, 1], true),
            (vec![8, 9, 2], true),
        ]
    );
    // ACA first turns the run [8,5,1] into a jump; BBB then diverges at
    // its first symbol and splits it back into regular nodes
    let out = t.search(&SymbolKey::encode(b"ACA").unwrap());
    let kinds: Vec<&str> = out
        .path
        .iter()
        .map(|s| match s.node.entry.node {
            Node::Root { .. } => "root",
            Node::Internal { .. } => "internal",
            Node::Jump { .. } => "jump",
            Node::Leaf { .. } => "leaf",
        })
        .collect();
    assert_eq!(kinds, ["root", "internal", "internal", "internal", "leaf"]);
}

#[test]
fn first_split_builds_a_jump() {
    let t = CuckooTrie::new(1024, 42).unwrap();
    t.insert(b"AB", 0).unwrap();
    t.insert(b"ACA", 0).unwrap();
    let out = t.search(&SymbolKey::encode(b"ACA").unwrap());
    match out.path[1].node.entry.node {
        Node::Jump { label, .. } => assert_eq!(label.as_slice(), [5, 1]),
        ref other => panic!("expected a jump, got {other:?}"),
    }
    t.check_invariants().unwrap();
}

#[test]
fn ordered_operations() {
    let t = fixture();
    let all: Vec<&[u8]> = t.iter().map(|r| r.key()).collect();
    assert_eq!(all, KEYS);
    assert_eq!(t.predecessor(b"BBB").unwrap().unwrap().key(), b"ACA");
    assert!(t.predecessor(b"AB").unwrap().is_none());
    assert_eq!(t.predecessor(b"ZZ").unwrap().unwrap().key(), b"BD");
    assert_eq!(t.range_start(b"AC", true).unwrap().unwrap().key(), b"ACA");
    assert_eq!(t.range_start(b"ACA", true).unwrap().unwrap().key(), b"ACA");
    assert_eq!(t.range_start(b"ACA", false).unwrap().unwrap().key(), b"BBB");
    assert_eq!(t.range_start(b"", true).unwrap().unwrap().key(), b"AB");
    assert!(t.range_start(b"C", true).unwrap().is_none());
    assert_eq!(t.scan(b"A", 100).len(), 4);
    assert_eq!(t.scan(b"B", 1)[0].key(), b"BBB");
    assert!(t.scan(b"A", 0).is_empty());
}

#[test]
fn empty_ranges() {
    use std::ops::Bound::*;
    let t = fixture();
    assert_eq!(t.range(Included(&b"BD"[..]), Excluded(&b"BD"[..])).count(), 0);
    assert_eq!(t.range(Included(&b"C"[..]), Unbounded).count(), 0);
    let mid: Vec<&[u8]> = t
        .range(Excluded(&b"AB"[..]), Included(&b"BBB"[..]))
        .map(|r| r.key())
        .collect();
    assert_eq!(mid, [&b"ACA"[..], b"BBB"]);
}

#[test]
fn deleting_a_sibling_collapses_the_parent() {
    let t = fixture();
    t.delete(b"BBB").unwrap();
    t.check_invariants().unwrap();
    // BD is alone under [8,9]; it moves up to the first symbol where it
    // differs from AB and ACA
    let out = t.search(&SymbolKey::encode(b"BD").unwrap());
    assert!(out.terminal().node.entry.is_leaf());
    assert_eq!(out.terminal().depth, 2);
    let fresh = CuckooTrie::new(1024, 42).unwrap();
    for k in [&b"AB"[..], b"ACA", b"BD"] {
        fresh.insert(k, 0).unwrap();
    }
    assert_eq!(t.logical_trie(), fresh.logical_trie());
}

#[test]
fn deleting_the_maximum_repairs_subtree_max() {
    let t = fixture();
    t.delete(b"BD").unwrap();
    t.check_invariants().unwrap();
    assert_eq!(t.predecessor(b"C").unwrap().unwrap().key(), b"BBB");
    t.delete(b"BBB").unwrap();
    t.check_invariants().unwrap();
    assert_eq!(t.predecessor(b"C").unwrap().unwrap().key(), b"ACA");
}
