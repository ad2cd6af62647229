//! The operations a workload needs, over the trie or a reference map.

use std::collections::BTreeMap;
use std::ops::Bound;
use std::sync::RwLock;

use cuckoo_trie::{CuckooTrie, DeleteOutcome, Error, InsertOutcome};

pub trait OrderedIndex: Sync {
    /// True if the key was new.
    fn insert(&self, key: &[u8], value: u64) -> Result<bool, Error>;
    fn get(&self, key: &[u8]) -> Option<u64>;
    /// Overwrites the value of an existing key.
    fn update(&self, key: &[u8], value: u64) -> bool;
    /// Reads the value and writes it back plus one. Returns the value read.
    fn read_modify_write(&self, key: &[u8]) -> Option<u64>;
    fn delete(&self, key: &[u8]) -> bool;
    fn predecessor(&self, key: &[u8]) -> Option<Vec<u8>>;
    /// Up to `count` pairs starting at the first key `>= start`.
    fn scan(&self, start: &[u8], count: usize, out: &mut Vec<(Vec<u8>, u64)>);
}

impl OrderedIndex for CuckooTrie {
    fn insert(&self, key: &[u8], value: u64) -> Result<bool, Error> {
        Ok(matches!(CuckooTrie::insert(self, key, value)?, InsertOutcome::Inserted(_)))
    }

    fn get(&self, key: &[u8]) -> Option<u64> {
        CuckooTrie::get(self, key).ok().flatten().map(|r| r.value())
    }

    fn update(&self, key: &[u8], value: u64) -> bool {
        match CuckooTrie::get(self, key) {
            Ok(Some(r)) => {
                r.set_value(value);
                true
            }
            _ => false,
        }
    }

    fn read_modify_write(&self, key: &[u8]) -> Option<u64> {
        let r = CuckooTrie::get(self, key).ok().flatten()?;
        let v = r.value();
        r.set_value(v.wrapping_add(1));
        Some(v)
    }

    fn delete(&self, key: &[u8]) -> bool {
        matches!(CuckooTrie::delete(self, key), Ok(DeleteOutcome::Deleted))
    }

    fn predecessor(&self, key: &[u8]) -> Option<Vec<u8>> {
        CuckooTrie::predecessor(self, key)
            .ok()
            .flatten()
            .map(|r| r.key().to_vec())
    }

    fn scan(&self, start: &[u8], count: usize, out: &mut Vec<(Vec<u8>, u64)>) {
        out.clear();
        out.extend(
            CuckooTrie::scan(self, start, count)
                .into_iter()
                .map(|r| (r.key().to_vec(), r.value())),
        );
    }
}

/// A locked `BTreeMap`, the oracle for differential runs.
#[derive(Default)]
pub struct Reference(RwLock<BTreeMap<Vec<u8>, u64>>);

impl Reference {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl OrderedIndex for Reference {
    fn insert(&self, key: &[u8], value: u64) -> Result<bool, Error> {
        let mut m = self.0.write().unwrap();
        if m.contains_key(key) {
            return Ok(false);
        }
        m.insert(key.to_vec(), value);
        Ok(true)
    }

    fn get(&self, key: &[u8]) -> Option<u64> {
        self.0.read().unwrap().get(key).copied()
    }

    fn update(&self, key: &[u8], value: u64) -> bool {
        match self.0.write().unwrap().get_mut(key) {
            Some(v) => {
                *v = value;
                true
            }
            None => false,
        }
    }

    fn read_modify_write(&self, key: &[u8]) -> Option<u64> {
        let mut m = self.0.write().unwrap();
        let v = m.get_mut(key)?;
        let old = *v;
        *v = old.wrapping_add(1);
        Some(old)
    }

    fn delete(&self, key: &[u8]) -> bool {
        self.0.write().unwrap().remove(key).is_some()
    }

    fn predecessor(&self, key: &[u8]) -> Option<Vec<u8>> {
        self.0
            .read()
            .unwrap()
            .range::<[u8], _>((Bound::Unbounded, Bound::Excluded(key)))
            .next_back()
            .map(|(k, _)| k.clone())
    }

    fn scan(&self, start: &[u8], count: usize, out: &mut Vec<(Vec<u8>, u64)>) {
        out.clear();
        out.extend(
            self.0
                .read()
                .unwrap()
                .range::<[u8], _>((Bound::Included(start), Bound::Unbounded))
                .take(count)
                .map(|(k, v)| (k.clone(), *v)),
        );
    }
}
