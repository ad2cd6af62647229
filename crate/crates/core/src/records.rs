//! Append-only record arena. Leaves point here for their full key.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crate::entry::RecordRef;

/// A stored key with a mutable 64-bit value.
#[derive(Debug)]
pub struct Record {
    key: Box<[u8]>,
    value: AtomicU64,
}

impl Record {
    pub fn key(&self) -> &[u8] {
        &self.key
    }

    pub fn value(&self) -> u64 {
        self.value.load(Ordering::Acquire)
    }

    pub fn set_value(&self, v: u64) {
        self.value.store(v, Ordering::Release);
    }

    /// Atomically adds to the value, returning the previous one.
    pub fn fetch_add(&self, delta: u64) -> u64 {
        self.value.fetch_add(delta, Ordering::AcqRel)
    }
}

/// Records are never freed; deleted keys leave their record behind.
#[derive(Default)]
pub struct RecordStore {
    records: boxcar::Vec<Record>,
    key_bytes: AtomicUsize,
}

impl RecordStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, key: &[u8], value: u64) -> RecordRef {
        let idx = self.records.push(Record {
            key: key.into(),
            value: AtomicU64::new(value),
        });
        self.key_bytes.fetch_add(key.len(), Ordering::Relaxed);
        assert!(idx as u64 <= RecordRef::MAX, "record store exhausted");
        RecordRef(idx as u64)
    }

    pub fn get(&self, r: RecordRef) -> &Record {
        &self.records[r.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.records.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Approximate heap footprint: record headers plus key bytes.
    pub fn size_bytes(&self) -> usize {
        self.len() * std::mem::size_of::<Record>() + self.key_bytes.load(Ordering::Relaxed)
    }

    /// Memory address of a record, for prefetching.
    pub(crate) fn peek(&self, r: RecordRef) -> Option<&Record> {
        self.records.get(r.0 as usize)
    }
}
