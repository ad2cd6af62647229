#![allow(dead_code)]

use std::collections::BTreeMap;

use cuckoo_trie::keycodec::{common_prefix_len, encode_symbols};
use cuckoo_trie::LogicalTrie;
use rand::Rng;

/// The shape an uncompressed trie over `keys` must have: every prefix up to
/// each key's shortest distinguishing prefix, the last one being its leaf.
pub fn expected_shape<'a>(keys: impl IntoIterator<Item = &'a Vec<u8>>) -> LogicalTrie {
    let mut syms: Vec<Vec<u8>> = keys.into_iter().map(|k| encode_symbols(k)).collect();
    syms.sort();
    let mut shape = LogicalTrie::new();
    for i in 0..syms.len() {
        let mut lcp = 0;
        if i > 0 {
            lcp = lcp.max(common_prefix_len(&syms[i - 1], &syms[i]));
        }
        if i + 1 < syms.len() {
            lcp = lcp.max(common_prefix_len(&syms[i], &syms[i + 1]));
        }
        for j in 1..=lcp {
            shape.insert(syms[i][..j].to_vec(), false);
        }
        shape.insert(syms[i][..=lcp].to_vec(), true);
    }
    shape
}

/// Keys drawn from a few families so that short, long and shared prefixes
/// all occur: random fixed-width keys, keys that differ only at the end of a
/// long common run, and NUL-terminated strings over a tiny alphabet.
pub fn key_space(rng: &mut impl Rng, n: usize) -> Vec<Vec<u8>> {
    let mut keys = std::collections::BTreeSet::new();
    while keys.len() < n {
        let k = match rng.gen_range(0..3) {
            0 => rng.gen::<u64>().to_be_bytes().to_vec(),
            1 => {
                let mut k = vec![0x41u8; rng.gen_range(4..40)];
                let last = k.len() - 1;
                k[last] = rng.gen_range(1..=255);
                k.push(0);
                k
            }
            _ => {
                let len = rng.gen_range(1..8);
                let mut k: Vec<u8> = (0..len).map(|_| b"abc"[rng.gen_range(0..3)]).collect();
                k.push(0);
                k
            }
        };
        keys.insert(k);
    }
    // families 0 and 2 never contain each other, but a fixed-width key may
    // still be a byte prefix of a terminated one
    let all: Vec<Vec<u8>> = keys.into_iter().collect();
    let mut out: Vec<Vec<u8>> = Vec::new();
    for k in all {
        if out.iter().any(|o| o.starts_with(&k) || k.starts_with(o)) {
            continue;
        }
        out.push(k);
    }
    out
}

pub fn model_range(model: &BTreeMap<Vec<u8>, u64>, start: &[u8], count: usize) -> Vec<Vec<u8>> {
    model
        .range(start.to_vec()..)
        .take(count)
        .map(|(k, _)| k.clone())
        .collect()
}
