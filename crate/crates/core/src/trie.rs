//! The trie over the table: search, point lookup, insert and delete.
//!
//! Nodes are named by key prefixes and stored in the table under the hash of
//! their name, so every node on a search path can be located, and its
//! buckets prefetched, before its parent has been read. Each descent step
//! re-validates the parent's bucket version after locating the child.
//!
//! Writers run in two phases. A read-only phase (search plus predecessor
//! search) finds every entry the update will touch. The write phase locks
//! those buckets from the versions that were read, checks that nothing else
//! read has moved since, applies the update to private bucket copies and
//! publishes them at once. Any mismatch restarts the operation.

use crate::entry::{ChildMap, Entry, JumpLabel, Locator, Node, RecordRef, MAX_JUMP};
use crate::error::{Error, Result};
use crate::hash::{HashParams, HashValue};
use crate::keycodec::{common_prefix_len, encode_symbols, Symbol, SymbolKey};
use crate::records::{Record, RecordStore};
use crate::table::{backoff, Conflict, EntryRef, Table, TxnError, WriteTxn, SLOTS};

/// Default number of path levels fetched ahead of the descent.
pub const DEFAULT_PREFETCH_DEPTH: usize = 5;

/// Retries of a child lookup that keeps missing while the parent is unchanged
/// (a relocation in flight) before the whole search restarts.
const CHILD_RETRIES: u32 = 1 << 12;

#[derive(Clone, Debug)]
pub struct Config {
    /// Number of buckets `S`.
    pub buckets: usize,
    /// Seeds the bucket displacement table.
    pub seed: u64,
    /// Path levels prefetched ahead of the descent; 0 disables the hints.
    pub prefetch_depth: usize,
    /// Leaves subtree-max locators stale on insert. Exists to check that the
    /// differential harness notices.
    #[doc(hidden)]
    pub fault_skip_max_leaf_update: bool,
}

impl Config {
    pub fn new(buckets: usize, seed: u64) -> Self {
        Self {
            buckets,
            seed,
            prefetch_depth: DEFAULT_PREFETCH_DEPTH,
            fault_skip_max_leaf_update: false,
        }
    }

    pub fn prefetch_depth(mut self, depth: usize) -> Self {
        self.prefetch_depth = depth;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(RecordRef),
    /// The key was already stored; its record is untouched.
    AlreadyPresent(RecordRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeleteOutcome {
    Deleted,
    NotFound,
}

/// One node visited by a search.
#[derive(Clone, Copy, Debug)]
pub struct PathStep {
    pub node: EntryRef,
    /// Hash of the node's name.
    pub hash: HashValue,
    /// Length of the node's name in symbols.
    pub depth: usize,
}

impl PathStep {
    pub fn locator(&self) -> Locator {
        Locator::new(self.hash, self.node.entry.color)
    }
}

/// Where a search stopped.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Root first, terminal node last.
    pub path: Vec<PathStep>,
    /// Position reached inside a terminal jump node.
    pub depth_in_jump: usize,
    /// Key symbols consumed.
    pub matched_symbols: usize,
}

impl SearchOutcome {
    pub fn terminal(&self) -> &PathStep {
        self.path.last().expect("path always holds the root")
    }

    fn reads(&self) -> Vec<(usize, u32)> {
        self.path
            .iter()
            .map(|s| (s.node.bucket, s.node.version))
            .collect()
    }
}

/// A key prepared for the trie: its symbols and the hash of every prefix.
pub(crate) struct Probe<'k> {
    pub bytes: &'k [u8],
    pub syms: Vec<Symbol>,
    pub hashes: Vec<HashValue>,
}

enum Step {
    Fail,
    Null,
    Child(EntryRef, usize),
}

/// Why a write attempt did not complete.
#[derive(Debug)]
enum WriteError {
    Retry,
    Full,
}

impl From<TxnError> for WriteError {
    fn from(e: TxnError) -> Self {
        match e {
            TxnError::Conflict => WriteError::Retry,
            TxnError::TableFull => WriteError::Full,
        }
    }
}

impl From<Conflict> for WriteError {
    fn from(_: Conflict) -> Self {
        WriteError::Retry
    }
}

/// Result of a predecessor hunt, with every bucket version it relied on.
pub(crate) struct PredSearch {
    pub pred: Option<EntryRef>,
    pub reads: Vec<(usize, u32)>,
}

/// Where a predecessor hunt starts.
#[derive(Clone, Copy)]
pub(crate) enum PredFrom {
    /// From the terminal of the search, comparing against the searched key.
    Terminal,
    /// Left of `path[i]`: everything in its subtree is excluded.
    LeftOf(usize),
}

/// Interior node created by a split.
#[derive(Clone, Debug)]
enum Inner {
    Regular(ChildMap),
    Jump(JumpLabel),
}

struct Placed {
    loc: Locator,
    is_jump: bool,
}

/// An ordered index over byte-string keys.
pub struct CuckooTrie {
    table: Table,
    records: RecordStore,
    prefetch_depth: usize,
    fault_skip_max_leaf_update: bool,
}

impl CuckooTrie {
    /// An empty index with `buckets` buckets.
    ///
    /// `buckets` must be even. When it is a power of two the prefix hash
    /// reduces to a bit rotation and keys with long runs of equal symbols
    /// collide heavily; [`CuckooTrie::buckets_for_keys`] avoids such counts.
    pub fn new(buckets: usize, seed: u64) -> Result<Self> {
        Self::with_config(Config::new(buckets, seed))
    }

    pub fn with_config(config: Config) -> Result<Self> {
        Ok(Self {
            table: Table::new(config.buckets, config.seed)?,
            records: RecordStore::new(),
            prefetch_depth: config.prefetch_depth,
            fault_skip_max_leaf_update: config.fault_skip_max_leaf_update,
        })
    }

    /// Bucket count that keeps `keys` random keys near the given load factor,
    /// assuming 1.35 nodes per key. Never a power of two.
    pub fn buckets_for_keys(keys: usize, load_factor: f64) -> usize {
        let nodes = (keys as f64 * 1.35).ceil() + 1.0;
        let buckets = (nodes / (SLOTS as f64 * load_factor)).ceil() as usize;
        let buckets = (buckets.max(crate::hash::MIN_BUCKETS) + 1) & !1;
        if buckets.is_power_of_two() {
            buckets + 2
        } else {
            buckets
        }
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn records(&self) -> &RecordStore {
        &self.records
    }

    pub fn params(&self) -> &HashParams {
        self.table.params()
    }

    pub fn prefetch_depth(&self) -> usize {
        self.prefetch_depth
    }

    pub(crate) fn probe<'k>(&self, key: &'k [u8]) -> Result<Probe<'k>> {
        if key.is_empty() {
            return Err(Error::EmptyKey);
        }
        Ok(self.probe_symbols(key, encode_symbols(key)))
    }

    fn probe_symbols<'k>(&self, bytes: &'k [u8], syms: Vec<Symbol>) -> Probe<'k> {
        let mut hashes = Vec::new();
        self.params().prefix_hashes(&syms, &mut hashes);
        Probe {
            bytes,
            syms,
            hashes,
        }
    }

    /// Descends along `key` as far as the trie allows.
    pub fn search(&self, key: &SymbolKey) -> SearchOutcome {
        let probe = self.probe_symbols(&[], key.symbols().to_vec());
        self.search_probe(&probe)
    }

    pub(crate) fn search_probe(&self, probe: &Probe<'_>) -> SearchOutcome {
        let k = &probe.syms;
        let hashes = &probe.hashes;
        let d = self.prefetch_depth;
        'restart: loop {
            if d > 0 {
                for h in hashes.iter().take(d + 1).skip(1) {
                    self.table.prefetch(*h);
                }
            }
            let root = self.table.read_root();
            let mut path = vec![PathStep {
                node: root,
                hash: HashValue::EMPTY,
                depth: 0,
            }];
            let mut node = root;
            let mut depth = 0;
            for i in 0..k.len() {
                if d > 0 && d + i + 1 < hashes.len() {
                    self.table.prefetch(hashes[d + i + 1]);
                }
                match self.find_child(&node, depth, probe, i) {
                    Step::Fail => continue 'restart,
                    Step::Null => {
                        return SearchOutcome {
                            path,
                            depth_in_jump: depth,
                            matched_symbols: i,
                        }
                    }
                    Step::Child(child, d2) => {
                        if d2 == 0 {
                            path.push(PathStep {
                                node: child,
                                hash: hashes[i + 1],
                                depth: i + 1,
                            });
                        }
                        node = child;
                        depth = d2;
                    }
                }
            }
            return SearchOutcome {
                path,
                depth_in_jump: depth,
                matched_symbols: k.len(),
            };
        }
    }

    /// One descent step from `n` (read under `n.version`) along `k[i]`.
    fn find_child(&self, n: &EntryRef, d: usize, probe: &Probe<'_>, i: usize) -> Step {
        let sym = probe.syms[i];
        let h = probe.hashes[i + 1];
        let mut round = 0;
        loop {
            let child = match n.entry.node {
                Node::Leaf { .. } => return Step::Null,
                Node::Internal { children, .. } | Node::Root { children, .. } => {
                    if !children.contains(sym) {
                        return Step::Null;
                    }
                    self.table.search_by_parent(h, sym, n.entry.color)
                }
                Node::Jump {
                    label, child_color, ..
                } => {
                    if label.get(d) != sym {
                        return Step::Null;
                    }
                    if d + 1 < label.len() {
                        return Step::Child(*n, d + 1);
                    }
                    self.table.search_by_color(h, sym, child_color)
                }
            };
            if self.table.version(n.bucket) != n.version {
                return Step::Fail;
            }
            match child {
                // a dirty leaf is mid-update or deleted
                Some(c) if c.entry.dirty => return Step::Fail,
                Some(c) => return Step::Child(c, 0),
                None if round > CHILD_RETRIES => return Step::Fail,
                // relocation in flight
                None => backoff(&mut round),
            }
        }
    }

    /// The record stored under `key`, if any.
    pub fn get(&self, key: &[u8]) -> Result<Option<&Record>> {
        let probe = self.probe(key)?;
        let out = self.search_probe(&probe);
        Ok(self.leaf_match(out.terminal(), key))
    }

    pub fn contains_key(&self, key: &[u8]) -> Result<bool> {
        Ok(self.get(key)?.is_some())
    }

    fn leaf_match(&self, step: &PathStep, key: &[u8]) -> Option<&Record> {
        match step.node.entry.node {
            Node::Leaf { record, .. } => {
                let r = self.records.get(record);
                (r.key() == key).then_some(r)
            }
            _ => None,
        }
    }

    pub(crate) fn record_of(&self, leaf: &EntryRef) -> &Record {
        match leaf.entry.node {
            Node::Leaf { record, .. } => self.records.get(record),
            _ => panic!("not a leaf: {:?}", leaf.entry),
        }
    }

    /// True when no bucket in `reads` changed since it was read.
    pub(crate) fn unchanged(&self, reads: &[(usize, u32)]) -> bool {
        reads
            .iter()
            .all(|&(bucket, version)| self.table.version(bucket) == version)
    }

    /// Largest leaf strictly below the searched key, read without locks.
    /// `Err` means a concurrent change was observed and the caller restarts.
    pub(crate) fn pred_search(
        &self,
        probe: &Probe<'_>,
        out: &SearchOutcome,
        from: PredFrom,
    ) -> Result<PredSearch, ()> {
        let path = &out.path;
        let mut reads = out.reads();
        let t = path.len() - 1;
        let i = out.matched_symbols;
        let ascend_from = match from {
            PredFrom::LeftOf(j) => j,
            PredFrom::Terminal => {
                let term = &path[t];
                match term.node.entry.node {
                    Node::Leaf { .. } => {
                        if self.record_of(&term.node).key() < probe.bytes {
                            return Ok(PredSearch {
                                pred: Some(term.node),
                                reads,
                            });
                        }
                        t
                    }
                    Node::Internal { children, .. } | Node::Root { children, .. } => {
                        match (i < probe.syms.len())
                            .then(|| children.highest_below(probe.syms[i]))
                            .flatten()
                        {
                            Some(b) => {
                                let pred = self.max_under(term, b, &mut reads)?;
                                return Ok(PredSearch {
                                    pred: Some(pred),
                                    reads,
                                });
                            }
                            None => t,
                        }
                    }
                    Node::Jump { label, max_leaf, .. } => {
                        if i < probe.syms.len() && label.get(out.depth_in_jump) < probe.syms[i] {
                            let pred = self.resolve_leaf(max_leaf, &mut reads)?;
                            return Ok(PredSearch {
                                pred: Some(pred),
                                reads,
                            });
                        }
                        t
                    }
                }
            }
        };
        for idx in (0..ascend_from).rev() {
            let step = &path[idx];
            let Some(children) = step.node.entry.node.children() else {
                continue;
            };
            if let Some(b) = children.highest_below(probe.syms[step.depth]) {
                let pred = self.max_under(step, b, &mut reads)?;
                return Ok(PredSearch {
                    pred: Some(pred),
                    reads,
                });
            }
        }
        Ok(PredSearch { pred: None, reads })
    }

    /// Largest leaf under the child `b` of the regular node `parent`.
    fn max_under(
        &self,
        parent: &PathStep,
        b: Symbol,
        reads: &mut Vec<(usize, u32)>,
    ) -> Result<EntryRef, ()> {
        let h = self.params().extend(parent.hash, b);
        let child = self
            .table
            .search_by_parent(h, b, parent.node.entry.color)
            .ok_or(())?;
        reads.push((child.bucket, child.version));
        match child.entry.node {
            Node::Leaf { .. } if child.entry.dirty => Err(()),
            Node::Leaf { .. } => Ok(child),
            Node::Internal { max_leaf, .. } | Node::Jump { max_leaf, .. } => {
                self.resolve_leaf(max_leaf, reads)
            }
            Node::Root { .. } => Err(()),
        }
    }

    fn resolve_leaf(
        &self,
        loc: Option<Locator>,
        reads: &mut Vec<(usize, u32)>,
    ) -> Result<EntryRef, ()> {
        let leaf = self.table.resolve(loc).ok_or(())?;
        reads.push((leaf.bucket, leaf.version));
        if !leaf.entry.is_leaf() || leaf.entry.dirty {
            return Err(());
        }
        Ok(leaf)
    }

    /// Lowest index `j` such that every node in `path[j..=top]` continues the
    /// path through its largest child, i.e. the nodes whose subtree maximum
    /// lies in the subtree of `path[top + 1]`. `top_override` replaces the
    /// test for `path[top]`.
    fn rightmost_from(
        &self,
        probe: &Probe<'_>,
        path: &[PathStep],
        top: usize,
        top_override: Option<bool>,
    ) -> usize {
        let mut j = top + 1;
        for idx in (0..=top).rev() {
            let step = &path[idx];
            let ok = match (idx == top).then_some(top_override).flatten() {
                Some(o) => o,
                None => match step.node.entry.node {
                    Node::Jump { .. } => true,
                    Node::Internal { children, .. } | Node::Root { children, .. } => {
                        children.highest() == Some(probe.syms[step.depth])
                    }
                    Node::Leaf { .. } => false,
                },
            };
            if !ok {
                break;
            }
            j = idx;
        }
        j
    }

    /// Inserts `key` with `value`. An existing key keeps its record.
    pub fn insert(&self, key: &[u8], value: u64) -> Result<InsertOutcome> {
        let probe = self.probe(key)?;
        let mut record: Option<RecordRef> = None;
        let mut round = 0;
        loop {
            let out = self.search_probe(&probe);
            let term = *out.terminal();
            let attempt = match term.node.entry.node {
                Node::Leaf { record: existing, .. } => {
                    let existing_key = self.records.get(existing).key();
                    if existing_key == key {
                        return Ok(InsertOutcome::AlreadyPresent(existing));
                    }
                    if existing_key.starts_with(key) || key.starts_with(existing_key) {
                        return Err(Error::PrefixConflict);
                    }
                    let leaf_syms = encode_symbols(existing_key);
                    let m = common_prefix_len(&probe.syms, &leaf_syms);
                    if m >= probe.syms.len() || m >= leaf_syms.len() {
                        return Err(Error::PrefixConflict);
                    }
                    let rec = *record.get_or_insert_with(|| self.records.push(key, value));
                    self.split_leaf(&probe, &out, &leaf_syms, rec)
                }
                _ if out.matched_symbols >= probe.syms.len() => {
                    return Err(Error::PrefixConflict);
                }
                Node::Internal { .. } | Node::Root { .. } => {
                    let rec = *record.get_or_insert_with(|| self.records.push(key, value));
                    self.add_leaf(&probe, &out, rec)
                }
                Node::Jump { .. } => {
                    let rec = *record.get_or_insert_with(|| self.records.push(key, value));
                    self.split_jump(&probe, &out, rec)
                }
            };
            match attempt {
                Ok(()) => return Ok(InsertOutcome::Inserted(record.unwrap())),
                Err(WriteError::Retry) => backoff(&mut round),
                Err(WriteError::Full) => return Err(self.full_error()),
            }
        }
    }

    fn full_error(&self) -> Error {
        Error::TableFull {
            occupied: self.table.occupied(),
            slots: self.table.bucket_count() * SLOTS,
        }
    }

    fn set_max(&self, txn: &mut WriteTxn<'_>, loc: Locator, max: Option<Locator>) {
        txn.modify(loc, |e| e.node.set_max_leaf(max));
    }

    fn set_next(txn: &mut WriteTxn<'_>, pred: Option<Locator>, next: Option<Locator>) {
        match pred {
            Some(p) => txn.modify(p, |e| match &mut e.node {
                Node::Leaf { next: n, .. } => *n = next,
                other => panic!("predecessor is not a leaf: {other:?}"),
            }),
            None => txn.modify(Locator::ROOT, |e| match &mut e.node {
                Node::Root { head, .. } => *head = next,
                _ => unreachable!(),
            }),
        }
    }

    fn next_of(txn: &WriteTxn<'_>, pred: Option<Locator>) -> Option<Locator> {
        match pred {
            Some(p) => match txn.get(p).node {
                Node::Leaf { next, .. } => next,
                _ => unreachable!(),
            },
            None => match txn.get(Locator::ROOT).node {
                Node::Root { head, .. } => head,
                _ => unreachable!(),
            },
        }
    }

    /// Buckets to lock for the list splice after `pred`.
    fn pred_lock(&self, out: &SearchOutcome, pred: &Option<EntryRef>) -> (usize, u32) {
        match pred {
            Some(p) => (p.bucket, p.version),
            None => (out.path[0].node.bucket, out.path[0].node.version),
        }
    }

    /// New leaf under a regular terminal node whose child bit is clear.
    fn add_leaf(&self, probe: &Probe<'_>, out: &SearchOutcome, rec: RecordRef) -> Result<(), WriteError> {
        let path = &out.path;
        let t = path.len() - 1;
        let term = path[t];
        let i = out.matched_symbols;
        let c = probe.syms[i];
        let children = term.node.entry.node.children().unwrap();
        let ps = self
            .pred_search(probe, out, PredFrom::Terminal)
            .map_err(|_| WriteError::Retry)?;
        let top_is_max = children.highest().is_none_or(|h| c > h);
        let chain = self.rightmost_from(probe, path, t, Some(top_is_max));

        let mut locks = vec![(term.node.bucket, term.node.version), self.pred_lock(out, &ps.pred)];
        locks.extend(path[chain..=t].iter().map(|s| (s.node.bucket, s.node.version)));
        let mut txn = WriteTxn::begin(&self.table, &locks)?;
        if !txn.validate(&ps.reads) {
            return Err(WriteError::Retry);
        }
        let pred = ps.pred.map(|p| self.table.locator_of(&p));
        let succ = Self::next_of(&txn, pred);
        let h = probe.hashes[i + 1];
        let color = txn.insert(
            h,
            Entry::new(
                c,
                term.node.entry.color,
                false,
                Node::Leaf {
                    record: rec,
                    next: succ,
                },
            ),
        )?;
        let leaf = Locator::new(h, color);
        txn.modify(term.locator(), |e| e.node.children_mut().insert(c));
        if !self.fault_skip_max_leaf_update {
            for step in &path[chain..=t] {
                self.set_max(&mut txn, step.locator(), Some(leaf));
            }
        }
        Self::set_next(&mut txn, pred, Some(leaf));
        txn.commit();
        Ok(())
    }

    /// Splits `syms[from..to]` into chain nodes: jumps of at most `MAX_JUMP`
    /// symbols, with a lone leftover symbol as a single-child regular node.
    fn chain(syms: &[Symbol], from: usize, to: usize, out: &mut Vec<(usize, Inner)>) {
        let mut pos = from;
        while pos < to {
            let len = (to - pos).min(MAX_JUMP);
            let inner = if len == 1 {
                Inner::Regular(ChildMap::of(&[syms[pos]]))
            } else {
                Inner::Jump(JumpLabel::new(&syms[pos..pos + len]))
            };
            out.push((pos, inner));
            pos += len;
        }
    }

    fn inner_node(inner: &Inner, max: Option<Locator>) -> Node {
        match inner {
            Inner::Regular(children) => Node::Internal {
                children: *children,
                max_leaf: max,
            },
            Inner::Jump(label) => Node::Jump {
                label: *label,
                child_color: 0,
                max_leaf: max,
            },
        }
    }

    /// Places a node as the child of `parent`, wiring the parent link.
    fn place_child(
        &self,
        txn: &mut WriteTxn<'_>,
        parent: &Placed,
        h: HashValue,
        last_symbol: Symbol,
        node: Node,
    ) -> Result<Placed, WriteError> {
        let is_jump = matches!(node, Node::Jump { .. });
        let entry = if parent.is_jump {
            Entry::new(last_symbol, 0, true, node)
        } else {
            Entry::new(last_symbol, parent.loc.color, false, node)
        };
        let color = txn.insert(h, entry)?;
        if parent.is_jump {
            txn.modify(parent.loc, |e| match &mut e.node {
                Node::Jump { child_color, .. } => *child_color = color,
                _ => unreachable!(),
            });
        }
        Ok(Placed {
            loc: Locator::new(h, color),
            is_jump,
        })
    }

    /// Rewrites an existing entry in place as `node`, keeping its identity.
    fn replace_in_place(txn: &mut WriteTxn<'_>, loc: Locator, node: Node) -> Placed {
        txn.modify(loc, |e| {
            e.node = node;
            e.dirty = false;
        });
        Placed {
            loc,
            is_jump: matches!(node, Node::Jump { .. }),
        }
    }

    /// Terminal leaf holds another key: grow the common prefix, then hang
    /// both leaves under its last node.
    fn split_leaf(
        &self,
        probe: &Probe<'_>,
        out: &SearchOutcome,
        leaf_syms: &[Symbol],
        rec: RecordRef,
    ) -> Result<(), WriteError> {
        let path = &out.path;
        let t = path.len() - 1;
        let old = path[t];
        let start = old.depth;
        let k = &probe.syms;
        let m = common_prefix_len(k, leaf_syms);
        debug_assert!(m >= start);
        let Node::Leaf {
            record: old_record, ..
        } = old.node.entry.node
        else {
            unreachable!()
        };

        let ps = self
            .pred_search(probe, out, PredFrom::LeftOf(t))
            .map_err(|_| WriteError::Retry)?;
        let chain = self.rightmost_from(probe, path, t - 1, None);

        let mut locks = vec![(old.node.bucket, old.node.version), self.pred_lock(out, &ps.pred)];
        locks.extend(path[chain..t].iter().map(|s| (s.node.bucket, s.node.version)));
        let mut txn = WriteTxn::begin(&self.table, &locks)?;
        if !txn.validate(&ps.reads) {
            return Err(WriteError::Retry);
        }
        let pred = ps.pred.map(|p| self.table.locator_of(&p));
        let old_next = match txn.get(old.locator()).node {
            Node::Leaf { next, .. } => next,
            _ => unreachable!(),
        };

        let mut inners = Vec::new();
        Self::chain(k, start, m, &mut inners);
        inners.push((m, Inner::Regular(ChildMap::of(&[k[m], leaf_syms[m]]))));

        let mut placed = Self::replace_in_place(
            &mut txn,
            old.locator(),
            Self::inner_node(&inners[0].1, None),
        );
        let mut inner_locs = vec![placed.loc];
        for (depth, inner) in &inners[1..] {
            placed = self.place_child(
                &mut txn,
                &placed,
                probe.hashes[*depth],
                k[depth - 1],
                Self::inner_node(inner, None),
            )?;
            inner_locs.push(placed.loc);
        }
        let new_leaf = self.place_child(
            &mut txn,
            &placed,
            probe.hashes[m + 1],
            k[m],
            Node::Leaf { record: rec, next: None },
        )?;
        let moved_leaf = self.place_child(
            &mut txn,
            &placed,
            self.params().extend(probe.hashes[m], leaf_syms[m]),
            leaf_syms[m],
            Node::Leaf {
                record: old_record,
                next: None,
            },
        )?;
        let (lo, hi) = if leaf_syms[m] < k[m] {
            (moved_leaf.loc, new_leaf.loc)
        } else {
            (new_leaf.loc, moved_leaf.loc)
        };
        Self::set_next(&mut txn, Some(lo), Some(hi));
        Self::set_next(&mut txn, Some(hi), old_next);
        Self::set_next(&mut txn, pred, Some(lo));
        for loc in inner_locs {
            self.set_max(&mut txn, loc, Some(hi));
        }
        if !self.fault_skip_max_leaf_update {
            for step in &path[chain..t] {
                self.set_max(&mut txn, step.locator(), Some(hi));
            }
        }
        txn.commit();
        Ok(())
    }

    /// The search left a jump node part way: cut the jump at the point of
    /// divergence and hang the new leaf off the regular node created there.
    fn split_jump(&self, probe: &Probe<'_>, out: &SearchOutcome, rec: RecordRef) -> Result<(), WriteError> {
        let path = &out.path;
        let t = path.len() - 1;
        let jump = path[t];
        let start = jump.depth;
        let d = out.depth_in_jump;
        let i = out.matched_symbols;
        debug_assert_eq!(i, start + d);
        let k = &probe.syms;
        let c = k[i];
        let Node::Jump {
            label,
            child_color,
            max_leaf: old_max,
        } = jump.node.entry.node
        else {
            unreachable!()
        };
        let sd = label.get(d);
        let size = label.len();
        let rest = &label.as_slice()[d + 1..];
        let params = self.params();

        // hash of the split point's continuation and of the jump's child
        let cont_hash = params.extend(probe.hashes[i], sd);
        let child_hash = rest.iter().fold(cont_hash, |h, &s| params.extend(h, s));

        let ps = self
            .pred_search(probe, out, PredFrom::Terminal)
            .map_err(|_| WriteError::Retry)?;
        let mut reads = ps.reads;
        let new_is_max = c > sd;
        let chain = if new_is_max && t > 0 {
            self.rightmost_from(probe, path, t - 1, None)
        } else {
            t
        };

        let mut locks = vec![(jump.node.bucket, jump.node.version), self.pred_lock(out, &ps.pred)];
        locks.extend(path[chain..t].iter().map(|s| (s.node.bucket, s.node.version)));
        // the jump's child gets a regular parent when at most one symbol is left
        let reparent = rest.len() <= 1;
        if reparent {
            let child = self
                .table
                .search_by_color(child_hash, label.get(size - 1), child_color)
                .ok_or(WriteError::Retry)?;
            locks.push((child.bucket, child.version));
            reads.push((child.bucket, child.version));
        }
        let mut txn = WriteTxn::begin(&self.table, &locks)?;
        if !txn.validate(&reads) {
            return Err(WriteError::Retry);
        }
        let pred = ps.pred.map(|p| self.table.locator_of(&p));
        let succ = Self::next_of(&txn, pred);

        let mut inners = Vec::new();
        Self::chain(label.as_slice(), 0, d, &mut inners);
        for (depth, _) in inners.iter_mut() {
            *depth += start;
        }
        inners.push((i, Inner::Regular(ChildMap::of(&[sd, c]))));

        let mut placed = Self::replace_in_place(
            &mut txn,
            jump.locator(),
            Self::inner_node(&inners[0].1, None),
        );
        let mut inner_locs = vec![placed.loc];
        for (depth, inner) in &inners[1..] {
            placed = self.place_child(
                &mut txn,
                &placed,
                probe.hashes[*depth],
                k[depth - 1],
                Self::inner_node(inner, None),
            )?;
            inner_locs.push(placed.loc);
        }
        let split_point = Placed {
            loc: placed.loc,
            is_jump: false,
        };

        // continuation towards the old child
        let child_loc = Locator::new(child_hash, child_color);
        match rest.len() {
            0 => txn.modify(child_loc, |e| {
                e.via_jump = false;
                e.parent_color = split_point.loc.color;
            }),
            1 => {
                let single = self.place_child(
                    &mut txn,
                    &split_point,
                    cont_hash,
                    sd,
                    Node::Internal {
                        children: ChildMap::of(rest),
                        max_leaf: old_max,
                    },
                )?;
                txn.modify(child_loc, |e| {
                    e.via_jump = false;
                    e.parent_color = single.loc.color;
                });
            }
            _ => {
                let cont = self.place_child(
                    &mut txn,
                    &split_point,
                    cont_hash,
                    sd,
                    Node::Jump {
                        label: JumpLabel::new(rest),
                        child_color: 0,
                        max_leaf: old_max,
                    },
                )?;
                txn.modify(cont.loc, |e| match &mut e.node {
                    Node::Jump { child_color: cc, .. } => *cc = child_color,
                    _ => unreachable!(),
                });
            }
        }

        let new_leaf = self.place_child(
            &mut txn,
            &split_point,
            probe.hashes[i + 1],
            c,
            Node::Leaf { record: rec, next: succ },
        )?;
        Self::set_next(&mut txn, pred, Some(new_leaf.loc));
        let split_max = if new_is_max { Some(new_leaf.loc) } else { old_max };
        for loc in inner_locs {
            self.set_max(&mut txn, loc, split_max);
        }
        if new_is_max && !self.fault_skip_max_leaf_update {
            for step in &path[chain..t] {
                self.set_max(&mut txn, step.locator(), Some(new_leaf.loc));
            }
        }
        txn.commit();
        Ok(())
    }

    /// Removes `key`.
    pub fn delete(&self, key: &[u8]) -> Result<DeleteOutcome> {
        let probe = self.probe(key)?;
        let mut round = 0;
        loop {
            let out = self.search_probe(&probe);
            if self.leaf_match(out.terminal(), key).is_none() {
                return Ok(DeleteOutcome::NotFound);
            }
            match self.remove_leaf(&probe, &out) {
                Ok(()) => return Ok(DeleteOutcome::Deleted),
                Err(WriteError::Retry) => backoff(&mut round),
                Err(WriteError::Full) => unreachable!("deletion allocates no entries"),
            }
        }
    }

    fn remove_leaf(&self, probe: &Probe<'_>, out: &SearchOutcome) -> Result<(), WriteError> {
        let path = &out.path;
        let t = path.len() - 1;
        let leaf = path[t];
        let parent = path[t - 1];
        let children = parent
            .node
            .entry
            .node
            .children()
            .expect("a leaf's parent is a regular node");
        let sym = leaf.node.entry.last_symbol;

        // a parent left with one leaf child collapses into that leaf
        let sibling = if t >= 2 && children.len() == 2 {
            let b = ChildMap(children.0 & !(1 << sym)).lowest().unwrap();
            let h = self.params().extend(parent.hash, b);
            let x = self
                .table
                .search_by_parent(h, b, parent.node.entry.color)
                .ok_or(WriteError::Retry)?;
            if x.entry.dirty {
                return Err(WriteError::Retry);
            }
            x.entry.is_leaf().then_some((x, h))
        } else {
            None
        };

        match sibling {
            None => {
                let ps = self
                    .pred_search(probe, out, PredFrom::LeftOf(t))
                    .map_err(|_| WriteError::Retry)?;
                let chain = self.rightmost_from(probe, path, t - 1, None);
                let mut locks = vec![
                    (leaf.node.bucket, leaf.node.version),
                    (parent.node.bucket, parent.node.version),
                    self.pred_lock(out, &ps.pred),
                ];
                locks.extend(path[chain..t].iter().map(|s| (s.node.bucket, s.node.version)));
                let mut txn = WriteTxn::begin(&self.table, &locks)?;
                if !txn.validate(&ps.reads) {
                    return Err(WriteError::Retry);
                }
                let pred = ps.pred.map(|p| self.table.locator_of(&p));
                txn.modify(leaf.locator(), |e| e.dirty = true);
                let next = Self::next_of(&txn, Some(leaf.locator()));
                txn.modify(parent.locator(), |e| e.node.children_mut().remove(sym));
                Self::set_next(&mut txn, pred, next);
                for step in &path[chain..t] {
                    self.set_max(&mut txn, step.locator(), pred);
                }
                txn.remove(leaf.locator());
                txn.commit();
                Ok(())
            }
            Some((survivor, survivor_hash)) => {
                // climb through single-child ancestors; the highest one is
                // replaced by the surviving leaf
                let mut a = t - 1;
                while a > 1 && Self::single_child(&path[a - 1].node.entry.node) {
                    a -= 1;
                }
                let ps = self
                    .pred_search(probe, out, PredFrom::LeftOf(a))
                    .map_err(|_| WriteError::Retry)?;
                let mut reads = ps.reads;
                reads.push((survivor.bucket, survivor.version));
                let chain = self.rightmost_from(probe, path, a - 1, None);
                let mut locks: Vec<(usize, u32)> = path[chain..=t]
                    .iter()
                    .map(|s| (s.node.bucket, s.node.version))
                    .collect();
                locks.push((survivor.bucket, survivor.version));
                locks.push(self.pred_lock(out, &ps.pred));
                let mut txn = WriteTxn::begin(&self.table, &locks)?;
                if !txn.validate(&reads) {
                    return Err(WriteError::Retry);
                }
                let pred = ps.pred.map(|p| self.table.locator_of(&p));
                let survivor_loc = Locator::new(survivor_hash, survivor.entry.color);
                let Node::Leaf {
                    record: survivor_record,
                    next: survivor_next,
                } = txn.get(survivor_loc).node
                else {
                    unreachable!()
                };
                let survivor_is_hi = self.records.get(survivor_record).key() > probe.bytes;
                let next = if survivor_is_hi {
                    survivor_next
                } else {
                    Self::next_of(&txn, Some(leaf.locator()))
                };
                txn.modify(leaf.locator(), |e| e.dirty = true);
                for step in &path[a + 1..=t] {
                    txn.remove(step.locator());
                }
                txn.remove(survivor_loc);
                let top = path[a].locator();
                Self::replace_in_place(
                    &mut txn,
                    top,
                    Node::Leaf {
                        record: survivor_record,
                        next,
                    },
                );
                Self::set_next(&mut txn, pred, Some(top));
                for step in &path[chain..a] {
                    self.set_max(&mut txn, step.locator(), Some(top));
                }
                txn.commit();
                Ok(())
            }
        }
    }

    fn single_child(node: &Node) -> bool {
        match node {
            Node::Jump { .. } => true,
            Node::Internal { children, .. } => children.len() == 1,
            _ => false,
        }
    }

    /// Largest stored key strictly below `key`.
    pub fn predecessor(&self, key: &[u8]) -> Result<Option<&Record>> {
        let probe = self.probe(key)?;
        let mut round = 0;
        loop {
            let out = self.search_probe(&probe);
            if let Ok(ps) = self.pred_search(&probe, &out, PredFrom::Terminal) {
                if self.unchanged(&ps.reads) {
                    return Ok(ps.pred.map(|p| self.record_of(&p)));
                }
            }
            backoff(&mut round);
        }
    }

    /// Smallest stored key above `key`, or equal to it when `inclusive`.
    pub fn successor(&self, key: &[u8], inclusive: bool) -> Result<Option<&Record>> {
        let probe = self.probe(key)?;
        Ok(self.successor_leaf(&probe, inclusive).map(|l| self.record_of(&l)))
    }

    pub(crate) fn successor_leaf(&self, probe: &Probe<'_>, inclusive: bool) -> Option<EntryRef> {
        let mut round = 0;
        loop {
            if let Some(found) = self.try_successor(probe, inclusive) {
                return found;
            }
            backoff(&mut round);
        }
    }

    /// `None` asks the caller to retry.
    fn try_successor(&self, probe: &Probe<'_>, inclusive: bool) -> Option<Option<EntryRef>> {
        let out = self.search_probe(probe);
        let term = out.terminal();
        let (next, mut reads) = match term.node.entry.node {
            Node::Leaf { next, .. } if self.record_of(&term.node).key() == probe.bytes => {
                if inclusive {
                    return Some(Some(term.node));
                }
                (next, out.reads())
            }
            _ => {
                let ps = self.pred_search(probe, &out, PredFrom::Terminal).ok()?;
                let next = match ps.pred {
                    Some(p) => match p.entry.node {
                        Node::Leaf { next, .. } => next,
                        _ => unreachable!(),
                    },
                    None => match out.path[0].node.entry.node {
                        Node::Root { head, .. } => head,
                        _ => unreachable!(),
                    },
                };
                (next, ps.reads)
            }
        };
        let found = match next {
            None => None,
            Some(loc) => {
                let leaf = self.table.resolve(Some(loc))?;
                if !leaf.entry.is_leaf() || leaf.entry.dirty {
                    return None;
                }
                reads.push((leaf.bucket, leaf.version));
                Some(leaf)
            }
        };
        self.unchanged(&reads).then_some(found)
    }

    /// Smallest leaf, via the root's head locator.
    pub(crate) fn first_leaf(&self) -> Option<EntryRef> {
        let mut round = 0;
        loop {
            let root = self.table.read_root();
            let Node::Root { head, .. } = root.entry.node else {
                unreachable!()
            };
            let Some(loc) = head else {
                if self.table.version(root.bucket) == root.version {
                    return None;
                }
                continue;
            };
            if let Some(leaf) = self.table.resolve(Some(loc)) {
                if leaf.entry.is_leaf()
                    && !leaf.entry.dirty
                    && self.table.version(root.bucket) == root.version
                {
                    return Some(leaf);
                }
            }
            backoff(&mut round);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CuckooTrie {
        CuckooTrie::new(256, 7).unwrap()
    }

    #[test]
    fn empty_trie_search_stops_at_root() {
        let t = small();
        let out = t.search(&SymbolKey::encode(b"anything").unwrap());
        assert_eq!(out.path.len(), 1);
        assert!(out.terminal().node.entry.is_root());
        assert_eq!(out.matched_symbols, 0);
    }

    #[test]
    fn single_key_round_trip() {
        let t = small();
        assert!(matches!(t.insert(b"AB", 1).unwrap(), InsertOutcome::Inserted(_)));
        assert_eq!(t.get(b"AB").unwrap().unwrap().value(), 1);
        assert!(t.get(b"AC").unwrap().is_none());
        // one leaf right under the root
        let out = t.search(&SymbolKey::encode(b"AB").unwrap());
        assert_eq!(out.path.len(), 2);
        assert!(out.terminal().node.entry.is_leaf());
    }

    #[test]
    fn duplicate_insert_keeps_record() {
        let t = small();
        let InsertOutcome::Inserted(r) = t.insert(b"key1", 5).unwrap() else {
            panic!()
        };
        assert_eq!(t.insert(b"key1", 9).unwrap(), InsertOutcome::AlreadyPresent(r));
        assert_eq!(t.get(b"key1").unwrap().unwrap().value(), 5);
    }

    #[test]
    fn empty_key_is_rejected() {
        let t = small();
        assert_eq!(t.insert(b"", 0), Err(Error::EmptyKey));
        assert!(t.get(b"").is_err());
    }

    #[test]
    fn byte_prefix_is_rejected() {
        let t = small();
        t.insert(b"abc", 0).unwrap();
        assert_eq!(t.insert(b"abcd", 0), Err(Error::PrefixConflict));
        assert_eq!(t.insert(b"ab", 0), Err(Error::PrefixConflict));
    }

    #[test]
    fn sizing_skips_powers_of_two() {
        for keys in [0, 100, 10_000, 419_430, 1_000_000] {
            let s = CuckooTrie::buckets_for_keys(keys, 0.8);
            assert!(s.is_multiple_of(2) && !s.is_power_of_two(), "{keys} -> {s}");
            assert!(s as f64 * SLOTS as f64 * 0.8 >= keys as f64 * 1.25);
        }
    }

    #[test]
    fn long_common_prefix_builds_jump_chain() {
        let t = CuckooTrie::new(1024, 1).unwrap();
        let mut a = vec![0x5a; 100];
        let mut b = a.clone();
        a.push(0x00);
        b.push(0xff);
        t.insert(&a, 1).unwrap();
        t.insert(&b, 2).unwrap();
        assert_eq!(t.get(&a).unwrap().unwrap().value(), 1);
        assert_eq!(t.get(&b).unwrap().unwrap().value(), 2);
        let out = t.search(&SymbolKey::encode(&a).unwrap());
        let jumps: Vec<usize> = out
            .path
            .iter()
            .filter_map(|s| match s.node.entry.node {
                Node::Jump { label, .. } => Some(label.len()),
                _ => None,
            })
            .collect();
        assert!(jumps.iter().all(|&l| (2..=MAX_JUMP).contains(&l)));
        // 160 shared symbols: the first is the old leaf's own slot, the rest
        // are jump labels
        assert_eq!(jumps.iter().sum::<usize>(), 159);
    }
}
