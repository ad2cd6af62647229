//! Bucketized cuckoo hash table with key elimination.
//!
//! Every bucket is one 64-byte cache line: a 32-bit version/lock word
//! followed by four packed 15-byte entries. Entries hold no key. A node is
//! identified either by `(hash, last_symbol, parent_color)`, checked against
//! the parent found one level up, or by `(hash, color)`.
//!
//! Readers never lock. They copy a bucket between two loads of its version
//! and retry when the version was odd or moved. Writers lock every bucket
//! they touch by compare-and-swap from the version they expect, apply their
//! changes to private copies, publish them, and release every lock by
//! bumping the version to `expected + 2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{fence, AtomicU32, Ordering};

use crate::entry::{Entry, Locator, Node, COLORS, ENTRY_BYTES};
use crate::error::Result;
use crate::hash::{HashParams, HashValue};
use crate::keycodec::Symbol;
use crate::prefetch;

/// Entries per bucket.
pub const SLOTS: usize = 4;

/// Longest eviction chain tried before an insertion reports a full table.
pub const MAX_KICKS: usize = 500;

const WORDS: usize = SLOTS * ENTRY_BYTES / 4;
const IMAGE_BYTES: usize = SLOTS * ENTRY_BYTES;

/// Bucket and slot of the root entry.
pub const ROOT_BUCKET: usize = 0;
pub const ROOT_SLOT: usize = 0;

#[repr(C, align(64))]
pub struct Bucket {
    version: AtomicU32,
    words: [AtomicU32; WORDS],
}

impl Default for Bucket {
    fn default() -> Self {
        Self {
            version: AtomicU32::new(0),
            words: Default::default(),
        }
    }
}

/// A private copy of a bucket's entries.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct BucketImage {
    bytes: [u8; IMAGE_BYTES],
}

impl BucketImage {
    fn load(bucket: &Bucket) -> Self {
        let mut bytes = [0u8; IMAGE_BYTES];
        for (i, w) in bucket.words.iter().enumerate() {
            bytes[4 * i..4 * i + 4].copy_from_slice(&w.load(Ordering::Relaxed).to_le_bytes());
        }
        Self { bytes }
    }

    fn store(&self, bucket: &Bucket) {
        for (i, w) in bucket.words.iter().enumerate() {
            let v = u32::from_le_bytes(self.bytes[4 * i..4 * i + 4].try_into().unwrap());
            w.store(v, Ordering::Relaxed);
        }
    }

    pub fn slot(&self, slot: usize) -> Option<Entry> {
        let raw: &[u8; ENTRY_BYTES] = self.bytes[slot * ENTRY_BYTES..(slot + 1) * ENTRY_BYTES]
            .try_into()
            .unwrap();
        Entry::unpack(raw)
    }

    pub fn set_slot(&mut self, slot: usize, entry: Option<Entry>) {
        let packed = entry.map_or([0u8; ENTRY_BYTES], |e| e.pack());
        self.bytes[slot * ENTRY_BYTES..(slot + 1) * ENTRY_BYTES].copy_from_slice(&packed);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, Entry)> + '_ {
        (0..SLOTS).filter_map(|s| self.slot(s).map(|e| (s, e)))
    }

    fn free_slot(&self) -> Option<usize> {
        (0..SLOTS).find(|&s| self.bytes[s * ENTRY_BYTES] & 0x7 == 0)
    }
}

/// A consistent snapshot of one entry and where it was read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntryRef {
    pub bucket: usize,
    pub slot: usize,
    /// Version of `bucket` the snapshot was taken under.
    pub version: u32,
    pub entry: Entry,
}

/// Another writer got there first; the caller restarts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conflict;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxnError {
    Conflict,
    TableFull,
}

impl From<Conflict> for TxnError {
    fn from(_: Conflict) -> Self {
        TxnError::Conflict
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelocateError {
    /// The slot holds nothing that may move.
    NotMovable,
    /// The alternate bucket has no free slot.
    DestinationFull,
}

/// Spin briefly, then give the CPU away.
#[inline]
pub(crate) fn backoff(round: &mut u32) {
    if *round < 16 {
        std::hint::spin_loop();
    } else {
        std::thread::yield_now();
    }
    *round = round.saturating_add(1);
}

pub struct Table {
    params: HashParams,
    buckets: Box<[Bucket]>,
}

impl Table {
    /// An empty table of `buckets` buckets with the root in its reserved slot.
    pub fn new(buckets: usize, seed: u64) -> Result<Self> {
        Ok(Self::with_params(HashParams::new(buckets, seed)?))
    }

    pub fn with_params(params: HashParams) -> Self {
        let buckets: Box<[Bucket]> = (0..params.bucket_count())
            .map(|_| Bucket::default())
            .collect();
        let table = Self { params, buckets };
        let root = Entry {
            tag: 0,
            is_primary: true,
            last_symbol: 0,
            color: 0,
            parent_color: 0,
            dirty: false,
            via_jump: false,
            node: Node::Root {
                children: Default::default(),
                max_leaf: None,
                head: None,
            },
        };
        let mut image = BucketImage::load(&table.buckets[ROOT_BUCKET]);
        image.set_slot(ROOT_SLOT, Some(root));
        image.store(&table.buckets[ROOT_BUCKET]);
        table
    }

    pub fn params(&self) -> &HashParams {
        &self.params
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Bytes occupied by the bucket array.
    pub fn size_bytes(&self) -> usize {
        self.buckets.len() * std::mem::size_of::<Bucket>()
    }

    #[inline]
    pub fn version(&self, bucket: usize) -> u32 {
        self.buckets[bucket].version.load(Ordering::Acquire)
    }

    /// Runs `f` on a copy of `bucket` taken under an even, unchanged version.
    pub fn read_consistent<R>(&self, bucket: usize, f: impl Fn(&BucketImage) -> R) -> (R, u32) {
        let (image, version) = self.read_bucket(bucket);
        (f(&image), version)
    }

    pub fn read_bucket(&self, bucket: usize) -> (BucketImage, u32) {
        let b = &self.buckets[bucket];
        let mut round = 0;
        loop {
            let v1 = b.version.load(Ordering::Acquire);
            if v1 & 1 == 0 {
                let image = BucketImage::load(b);
                fence(Ordering::Acquire);
                if b.version.load(Ordering::Relaxed) == v1 {
                    return (image, v1);
                }
            }
            backoff(&mut round);
        }
    }

    pub fn read_root(&self) -> EntryRef {
        let (image, version) = self.read_bucket(ROOT_BUCKET);
        EntryRef {
            bucket: ROOT_BUCKET,
            slot: ROOT_SLOT,
            version,
            entry: image.slot(ROOT_SLOT).expect("root slot is never empty"),
        }
    }

    /// Hash of the node held by `r`.
    pub fn hash_of(&self, r: &EntryRef) -> HashValue {
        self.params
            .hash_at(r.bucket, r.entry.tag, r.entry.is_primary)
    }

    pub fn locator_of(&self, r: &EntryRef) -> Locator {
        Locator::new(self.hash_of(r), r.entry.color)
    }

    #[inline]
    pub fn prefetch(&self, h: HashValue) {
        let (b1, b2) = self.params.buckets_for(h);
        prefetch::hint(&self.buckets[b1]);
        prefetch::hint(&self.buckets[b2]);
    }

    /// Calls `pick` on every entry stored under `h`; returns the first hit.
    fn first_for(&self, h: HashValue, pick: impl Fn(&Entry) -> bool) -> Option<EntryRef> {
        let (b1, b2) = self.params.buckets_for(h);
        let tag = self.params.tag(h);
        for (bucket, primary) in [(b1, true), (b2, false)] {
            let (image, version) = self.read_bucket(bucket);
            for (slot, entry) in image.entries() {
                if entry.tag == tag && entry.is_primary == primary && pick(&entry) {
                    return Some(EntryRef {
                        bucket,
                        slot,
                        version,
                        entry,
                    });
                }
            }
        }
        None
    }

    /// Every occupied entry whose hash is `h`.
    pub fn entries_for(&self, h: HashValue) -> Vec<EntryRef> {
        let (b1, b2) = self.params.buckets_for(h);
        let tag = self.params.tag(h);
        let mut out = Vec::new();
        for (bucket, primary) in [(b1, true), (b2, false)] {
            let (image, version) = self.read_bucket(bucket);
            out.extend(
                image
                    .entries()
                    .filter(|(_, e)| e.tag == tag && e.is_primary == primary)
                    .map(|(slot, entry)| EntryRef {
                        bucket,
                        slot,
                        version,
                        entry,
                    }),
            );
        }
        out
    }

    /// The child reached from the parent colored `parent_color` by `last_symbol`.
    pub fn search_by_parent(
        &self,
        h: HashValue,
        last_symbol: Symbol,
        parent_color: u8,
    ) -> Option<EntryRef> {
        self.first_for(h, |e| {
            !e.is_root()
                && !e.via_jump
                && e.last_symbol == last_symbol
                && e.parent_color == parent_color
        })
    }

    /// The entry with hash `h`, last symbol `last_symbol` and color `color`.
    pub fn search_by_color(&self, h: HashValue, last_symbol: Symbol, color: u8) -> Option<EntryRef> {
        self.first_for(h, |e| {
            !e.is_root() && e.last_symbol == last_symbol && e.color == color
        })
    }

    /// The node a locator names, wherever it currently sits.
    pub fn resolve(&self, loc: Option<Locator>) -> Option<EntryRef> {
        let loc = loc?;
        if loc == Locator::ROOT {
            return Some(self.read_root());
        }
        self.first_for(loc.hash, |e| !e.is_root() && e.color == loc.color)
    }

    /// Locks `expected` buckets, each at the version given. On any mismatch
    /// nothing stays locked.
    pub fn lock_buckets(&self, expected: &[(usize, u32)]) -> Result<WriteTxn<'_>, Conflict> {
        WriteTxn::begin(self, expected)
    }

    /// Moves the entry at `(bucket, slot)` to its alternate bucket.
    /// Returns the destination bucket.
    pub fn relocate_one(&self, bucket: usize, slot: usize) -> Result<usize, RelocateError> {
        let mut round = 0;
        loop {
            let mut txn = WriteTxn::empty(self);
            let attempt = txn
                .lock_current(bucket)
                .map_err(|_| None)
                .and_then(|_| txn.relocate(bucket, slot).map_err(Some));
            match attempt {
                Ok(dest) => {
                    txn.commit();
                    return Ok(dest);
                }
                Err(Some(e)) => return Err(e),
                Err(None) => backoff(&mut round),
            }
        }
    }

    /// Occupied slots, root included. Only meaningful at quiescence.
    pub fn occupied(&self) -> usize {
        (0..self.buckets.len())
            .map(|b| self.read_bucket(b).0.entries().count())
            .sum()
    }

    /// Every occupied entry with its location. Only meaningful at quiescence.
    pub fn scan_entries(&self) -> Vec<EntryRef> {
        let mut out = Vec::new();
        for bucket in 0..self.buckets.len() {
            let (image, version) = self.read_bucket(bucket);
            out.extend(image.entries().map(|(slot, entry)| EntryRef {
                bucket,
                slot,
                version,
                entry,
            }));
        }
        out
    }

    /// One line per occupied entry:
    /// `bucket slot kind tag primary last_symbol color parent_color`.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for r in self.scan_entries() {
            let e = &r.entry;
            let kind = match e.node {
                Node::Leaf { .. } => "leaf",
                Node::Internal { .. } => "internal",
                Node::Jump { .. } => "jump",
                Node::Root { .. } => "root",
            };
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {}",
                r.bucket,
                r.slot,
                kind,
                e.tag,
                e.is_primary as u8,
                e.last_symbol,
                e.color,
                e.parent_color
            );
        }
        out
    }
}

struct Held {
    original: u32,
    image: BucketImage,
    modified: bool,
}

/// A set of locked buckets with private copies of their contents.
///
/// Changes become visible on [`WriteTxn::commit`]. Dropping the transaction
/// restores every version it locked and discards the copies.
pub struct WriteTxn<'t> {
    table: &'t Table,
    held: BTreeMap<usize, Held>,
    kicks: u64,
    done: bool,
}

impl<'t> WriteTxn<'t> {
    pub fn empty(table: &'t Table) -> Self {
        Self {
            table,
            held: BTreeMap::new(),
            kicks: 0,
            done: false,
        }
    }

    /// Locks the buckets in ascending order, each from the expected version.
    pub fn begin(table: &'t Table, expected: &[(usize, u32)]) -> Result<Self, Conflict> {
        let mut want: Vec<(usize, u32)> = expected.to_vec();
        want.sort_unstable();
        want.dedup();
        if want.windows(2).any(|w| w[0].0 == w[1].0) {
            // one bucket observed at two different versions
            return Err(Conflict);
        }
        let mut txn = Self::empty(table);
        for (bucket, version) in want {
            txn.lock_at(bucket, version)?;
        }
        Ok(txn)
    }

    fn lock_at(&mut self, bucket: usize, version: u32) -> Result<(), Conflict> {
        if version & 1 == 1 {
            return Err(Conflict);
        }
        let b = &self.table.buckets[bucket];
        b.version
            .compare_exchange(version, version + 1, Ordering::Acquire, Ordering::Relaxed)
            .map_err(|_| Conflict)?;
        fence(Ordering::Release);
        self.held.insert(
            bucket,
            Held {
                original: version,
                image: BucketImage::load(b),
                modified: false,
            },
        );
        Ok(())
    }

    /// Locks `bucket` at whatever even version it has now. Never waits.
    pub fn lock_current(&mut self, bucket: usize) -> Result<(), Conflict> {
        if self.held.contains_key(&bucket) {
            return Ok(());
        }
        let v = self.table.buckets[bucket].version.load(Ordering::Relaxed);
        self.lock_at(bucket, v)
    }

    pub fn holds(&self, bucket: usize) -> bool {
        self.held.contains_key(&bucket)
    }

    /// True when every bucket in `reads` still has the version it was read at.
    pub fn validate(&self, reads: &[(usize, u32)]) -> bool {
        reads.iter().all(|&(bucket, version)| match self.held.get(&bucket) {
            Some(h) => h.original == version,
            None => self.table.version(bucket) == version,
        })
    }

    pub fn image(&self, bucket: usize) -> &BucketImage {
        &self.held[&bucket].image
    }

    fn image_mut(&mut self, bucket: usize) -> &mut BucketImage {
        let h = self.held.get_mut(&bucket).expect("bucket not locked");
        h.modified = true;
        &mut h.image
    }

    /// Where the node named by `loc` sits among the locked buckets.
    pub fn find(&self, loc: Locator) -> Option<(usize, usize)> {
        if loc == Locator::ROOT {
            return self
                .holds(ROOT_BUCKET)
                .then_some((ROOT_BUCKET, ROOT_SLOT));
        }
        let params = &self.table.params;
        let (b1, b2) = params.buckets_for(loc.hash);
        let tag = params.tag(loc.hash);
        for (bucket, primary) in [(b1, true), (b2, false)] {
            let Some(h) = self.held.get(&bucket) else {
                continue;
            };
            for (slot, e) in h.image.entries() {
                if !e.is_root() && e.tag == tag && e.is_primary == primary && e.color == loc.color
                {
                    return Some((bucket, slot));
                }
            }
        }
        None
    }

    pub fn get(&self, loc: Locator) -> Entry {
        let (b, s) = self
            .find(loc)
            .unwrap_or_else(|| panic!("{loc:?} not in a locked bucket"));
        self.image(b).slot(s).unwrap()
    }

    pub fn modify(&mut self, loc: Locator, f: impl FnOnce(&mut Entry)) {
        let (b, s) = self
            .find(loc)
            .unwrap_or_else(|| panic!("{loc:?} not in a locked bucket"));
        let image = self.image_mut(b);
        let mut e = image.slot(s).unwrap();
        f(&mut e);
        image.set_slot(s, Some(e));
    }

    pub fn remove(&mut self, loc: Locator) -> Entry {
        let (b, s) = self
            .find(loc)
            .unwrap_or_else(|| panic!("{loc:?} not in a locked bucket"));
        let image = self.image_mut(b);
        let e = image.slot(s).unwrap();
        image.set_slot(s, None);
        e
    }

    /// Lowest color not used by any entry with hash `h`. Both buckets of `h`
    /// must be locked.
    fn free_color(&self, h: HashValue) -> u8 {
        let params = &self.table.params;
        let (b1, b2) = params.buckets_for(h);
        let tag = params.tag(h);
        let mut used = 0u8;
        for (bucket, primary) in [(b1, true), (b2, false)] {
            for (_, e) in self.image(bucket).entries() {
                if e.tag == tag && e.is_primary == primary {
                    used |= 1 << e.color;
                }
            }
        }
        // two buckets of four slots hold at most eight same-hash entries, and
        // the caller only asks while one of those slots is still needed
        assert!(used != u8::MAX, "all {COLORS} colors of hash {} in use", h.0);
        used.trailing_ones() as u8
    }

    /// Stores a new node under hash `h`, relocating residents if both of its
    /// buckets are full. Returns the color assigned.
    pub fn insert(&mut self, h: HashValue, mut entry: Entry) -> Result<u8, TxnError> {
        let params = &self.table.params;
        let (b1, b2) = params.buckets_for(h);
        self.lock_current(b1)?;
        self.lock_current(b2)?;
        let tag = params.tag(h);
        // a ninth same-hash node cannot fit anywhere
        let same_hash = [(b1, true), (b2, false)]
            .iter()
            .map(|&(b, p)| {
                self.image(b)
                    .entries()
                    .filter(|(_, e)| e.tag == tag && e.is_primary == p)
                    .count()
            })
            .sum::<usize>();
        if same_hash >= 2 * SLOTS {
            return Err(TxnError::TableFull);
        }
        entry.color = self.free_color(h);
        entry.tag = tag;
        for (bucket, primary) in [(b1, true), (b2, false)] {
            if let Some(slot) = self.image(bucket).free_slot() {
                entry.is_primary = primary;
                self.image_mut(bucket).set_slot(slot, Some(entry));
                return Ok(entry.color);
            }
        }
        let color = entry.color;
        self.kick_into(h, b1, b2, entry)?;
        Ok(color)
    }

    /// Random-walk eviction starting from one of the two full buckets.
    fn kick_into(&mut self, h: HashValue, b1: usize, b2: usize, entry: Entry) -> Result<(), TxnError> {
        let params = self.table.params.clone();
        let mut rng = (h.0 | 1).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ self.kicks;
        let mut next_rand = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            rng
        };
        let mut carry = entry;
        let mut bucket = if b1 == b2 || next_rand() & 1 == 0 { b1 } else { b2 };
        carry.is_primary = bucket == b1;
        for _ in 0..MAX_KICKS {
            self.lock_current(bucket)?;
            if let Some(slot) = self.image(bucket).free_slot() {
                self.image_mut(bucket).set_slot(slot, Some(carry));
                return Ok(());
            }
            self.kicks += 1;
            let mut slot = (next_rand() as usize) % SLOTS;
            if bucket == ROOT_BUCKET && slot == ROOT_SLOT {
                slot = 1 + (next_rand() as usize) % (SLOTS - 1);
            }
            let image = self.image_mut(bucket);
            let victim = image.slot(slot).unwrap();
            image.set_slot(slot, Some(carry));
            bucket = params.alternate_bucket(bucket, victim.tag, victim.is_primary);
            carry = victim;
            carry.is_primary = !victim.is_primary;
        }
        Err(TxnError::TableFull)
    }

    /// Moves the entry at `(bucket, slot)` into its alternate bucket, which
    /// gets locked on the way.
    pub fn relocate(&mut self, bucket: usize, slot: usize) -> Result<usize, RelocateError> {
        let image = self.image(bucket);
        let entry = match image.slot(slot) {
            Some(e) if !e.is_root() => e,
            _ => return Err(RelocateError::NotMovable),
        };
        let dest = self
            .table
            .params
            .alternate_bucket(bucket, entry.tag, entry.is_primary);
        if dest == bucket {
            return Err(RelocateError::DestinationFull);
        }
        self.lock_current(dest)
            .map_err(|_| RelocateError::DestinationFull)?;
        let Some(free) = self.image(dest).free_slot() else {
            return Err(RelocateError::DestinationFull);
        };
        let mut moved = entry;
        moved.is_primary = !entry.is_primary;
        self.image_mut(dest).set_slot(free, Some(moved));
        self.image_mut(bucket).set_slot(slot, None);
        Ok(dest)
    }

    /// Publishes every change and releases every lock.
    pub fn commit(mut self) {
        for (&bucket, held) in &self.held {
            if held.modified {
                held.image.store(&self.table.buckets[bucket]);
            }
        }
        for (&bucket, held) in &self.held {
            self.table.buckets[bucket]
                .version
                .store(held.original + 2, Ordering::Release);
        }
        self.done = true;
    }

    /// Releases the locks without publishing anything.
    pub fn abort(self) {}
}

impl Drop for WriteTxn<'_> {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for (&bucket, held) in &self.held {
            self.table.buckets[bucket]
                .version
                .store(held.original, Ordering::Release);
        }
    }
}
