//! Ordered iteration over the leaf list.
//!
//! Leaves are chained in key order by `next` locators; the root holds the
//! head. An iterator follows the chain and, whenever the bucket of the leaf
//! it stands on changes under it, finds its place again by searching for the
//! last key it returned.

use std::ops::Bound;

use crate::entry::Node;
use crate::error::Result;
use crate::prefetch;
use crate::records::Record;
use crate::table::{backoff, EntryRef};
use crate::trie::CuckooTrie;

/// Resolution misses tolerated on an unchanged bucket before a resync.
const NEXT_RETRIES: u32 = 64;

impl CuckooTrie {
    /// Smallest stored key not below `key` (or strictly above it when
    /// `inclusive` is false). An empty `key` starts at the minimum.
    pub fn range_start(&self, key: &[u8], inclusive: bool) -> Result<Option<&Record>> {
        if key.is_empty() {
            return Ok(self.first_leaf().map(|l| self.record_of(&l)));
        }
        self.successor(key, inclusive)
    }

    /// Iterator over keys within the bounds, in increasing order.
    pub fn range<'a>(&'a self, start: Bound<&[u8]>, end: Bound<&[u8]>) -> RangeIter<'a> {
        RangeIter {
            trie: self,
            start: Some(start.map(|k| k.to_vec())),
            end: end.map(|k| k.to_vec()),
            current: None,
            last_key: Vec::new(),
            done: false,
        }
    }

    /// Every key in order.
    pub fn iter(&self) -> RangeIter<'_> {
        self.range(Bound::Unbounded, Bound::Unbounded)
    }

    /// Up to `count` consecutive records starting at the first key `>= start`.
    pub fn scan(&self, start: &[u8], count: usize) -> Vec<&Record> {
        if count == 0 {
            return Vec::new();
        }
        self.range(Bound::Included(start), Bound::Unbounded)
            .take(count)
            .collect()
    }
}

/// Forward iterator over a key range.
///
/// Not a snapshot: keys inserted or deleted concurrently may or may not be
/// seen, but keys come out strictly increasing and every key present for the
/// whole iteration is returned.
pub struct RangeIter<'a> {
    trie: &'a CuckooTrie,
    start: Option<Bound<Vec<u8>>>,
    end: Bound<Vec<u8>>,
    current: Option<EntryRef>,
    last_key: Vec<u8>,
    done: bool,
}

impl<'a> RangeIter<'a> {
    fn first(&self, start: &Bound<Vec<u8>>) -> Option<EntryRef> {
        let t = self.trie;
        match start {
            Bound::Unbounded => t.first_leaf(),
            Bound::Included(k) | Bound::Excluded(k) if k.is_empty() => t.first_leaf(),
            Bound::Included(k) => t.successor_leaf(&t.probe(k).unwrap(), true),
            Bound::Excluded(k) => t.successor_leaf(&t.probe(k).unwrap(), false),
        }
    }

    /// The leaf after `cur`, re-searching when the chain cannot be trusted.
    fn advance(&self, cur: &EntryRef) -> Option<EntryRef> {
        let t = self.trie;
        let Node::Leaf { next, .. } = cur.entry.node else {
            unreachable!()
        };
        let mut round = 0;
        loop {
            let still = || t.table().version(cur.bucket) == cur.version;
            match next {
                None if still() => return None,
                None => break,
                Some(loc) => match t.table().resolve(Some(loc)) {
                    Some(n) if n.entry.is_leaf() && !n.entry.dirty && still() => return Some(n),
                    Some(_) => break,
                    None if still() && round < NEXT_RETRIES => backoff(&mut round),
                    None => break,
                },
            }
        }
        self.resync()
    }

    fn resync(&self) -> Option<EntryRef> {
        let t = self.trie;
        t.successor_leaf(&t.probe(&self.last_key).unwrap(), false)
    }

    fn past_end(&self, key: &[u8]) -> bool {
        match &self.end {
            Bound::Unbounded => false,
            Bound::Included(e) => key > e.as_slice(),
            Bound::Excluded(e) => key >= e.as_slice(),
        }
    }

    fn prefetch_next(&self, leaf: &EntryRef) {
        if let Node::Leaf { next: Some(loc), .. } = leaf.entry.node {
            self.trie.table().prefetch(loc.hash);
        }
    }
}

impl<'a> Iterator for RangeIter<'a> {
    type Item = &'a Record;

    fn next(&mut self) -> Option<&'a Record> {
        if self.done {
            return None;
        }
        let mut leaf = match (self.start.take(), &self.current) {
            (Some(start), _) => self.first(&start),
            (None, Some(cur)) => self.advance(cur),
            (None, None) => None,
        };
        // a leaf reached through a stale chain may lag behind
        while let Some(l) = leaf {
            if self.current.is_none() || self.trie.record_of(&l).key() > self.last_key.as_slice() {
                break;
            }
            leaf = self.resync();
        }
        let Some(l) = leaf else {
            self.done = true;
            return None;
        };
        let record = self.trie.record_of(&l);
        if self.past_end(record.key()) {
            self.done = true;
            return None;
        }
        self.prefetch_next(&l);
        if let Node::Leaf { record: r, .. } = l.entry.node {
            if let Some(rec) = self.trie.records().peek(r) {
                prefetch::hint(rec);
            }
        }
        self.last_key.clear();
        self.last_key.extend_from_slice(record.key());
        self.current = Some(l);
        Some(record)
    }
}
