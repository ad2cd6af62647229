//! Whole-structure statistics and consistency checks. These walk the entire
//! table and are meant for quiescent tries.

use std::collections::{BTreeMap, HashMap};

use crate::entry::{Locator, Node, NodeKind};
use crate::hash::HashValue;
use crate::keycodec::{common_prefix_len, encode_symbols, Symbol};
use crate::table::EntryRef;
use crate::trie::CuckooTrie;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub leaves: usize,
    pub internal: usize,
    pub jumps: usize,
    /// Symbols held in jump labels.
    pub jump_symbols: usize,
    /// Occupied slots, root included.
    pub occupied_slots: usize,
    pub buckets: usize,
    /// `buckets * 64`.
    pub index_bytes: usize,
    pub record_bytes: usize,
}

impl Stats {
    /// Trie nodes other than the root.
    pub fn nodes(&self) -> usize {
        self.leaves + self.internal + self.jumps
    }

    pub fn nodes_per_key(&self) -> f64 {
        self.nodes() as f64 / self.leaves.max(1) as f64
    }

    pub fn load_factor(&self) -> f64 {
        self.occupied_slots as f64 / (self.buckets * crate::table::SLOTS) as f64
    }

    pub fn memory_bytes(&self) -> usize {
        self.index_bytes + self.record_bytes
    }
}

/// A node of the trie with jump labels expanded: its name and whether it is
/// a leaf.
pub type LogicalTrie = BTreeMap<Vec<Symbol>, bool>;

impl CuckooTrie {
    pub fn stats(&self) -> Stats {
        let mut s = Stats {
            buckets: self.table().bucket_count(),
            index_bytes: self.table().size_bytes(),
            record_bytes: self.records().size_bytes(),
            ..Stats::default()
        };
        for e in self.table().scan_entries() {
            s.occupied_slots += 1;
            match &e.entry.node {
                Node::Leaf { .. } => s.leaves += 1,
                Node::Internal { .. } => s.internal += 1,
                Node::Jump { label, .. } => {
                    s.jumps += 1;
                    s.jump_symbols += label.len();
                }
                Node::Root { .. } => {}
            }
        }
        s
    }

    /// One line per occupied slot.
    pub fn debug_dump(&self) -> String {
        self.table().debug_dump()
    }

    /// Walks the trie from the root, returning every node by name.
    fn walk(&self) -> Result<Vec<(Vec<Symbol>, EntryRef)>, String> {
        let table = self.table();
        let params = self.params();
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), HashValue::EMPTY, table.read_root())];
        while let Some((name, h, node)) = stack.pop() {
            match node.entry.node {
                Node::Root { children, .. } | Node::Internal { children, .. } => {
                    if node.entry.kind() == NodeKind::Internal && children.is_empty() {
                        return Err(format!("childless internal node at {name:?}"));
                    }
                    for b in children.iter() {
                        let ch = params.extend(h, b);
                        let child = table
                            .search_by_parent(ch, b, node.entry.color)
                            .ok_or_else(|| format!("missing child {b} of {name:?}"))?;
                        let mut child_name = name.clone();
                        child_name.push(b);
                        stack.push((child_name, ch, child));
                    }
                }
                Node::Jump {
                    label, child_color, ..
                } => {
                    if label.len() < 2 {
                        return Err(format!("jump of size {} at {name:?}", label.len()));
                    }
                    let mut child_name = name.clone();
                    child_name.extend_from_slice(label.as_slice());
                    let ch = params.hash_of(&child_name);
                    let last = label.get(label.len() - 1);
                    let child = table
                        .search_by_color(ch, last, child_color)
                        .ok_or_else(|| format!("missing child of jump {name:?}"))?;
                    if !child.entry.via_jump {
                        return Err(format!("jump child {child_name:?} not marked"));
                    }
                    stack.push((child_name, ch, child));
                }
                Node::Leaf { .. } => {}
            }
            out.push((name, node));
        }
        Ok(out)
    }

    /// Expanded trie shape: every named prefix, including positions inside
    /// jump labels.
    pub fn logical_trie(&self) -> LogicalTrie {
        let mut t = LogicalTrie::new();
        for (name, node) in self.walk().expect("trie is consistent") {
            if let Node::Jump { label, .. } = node.entry.node {
                for j in 1..label.len() {
                    let mut inner = name.clone();
                    inner.extend_from_slice(&label.as_slice()[..j]);
                    t.insert(inner, false);
                }
            }
            if !name.is_empty() {
                t.insert(name, node.entry.is_leaf());
            }
        }
        t
    }

    /// Checks the structure against its definition. Call only while no
    /// writer is active.
    pub fn check_invariants(&self) -> Result<(), String> {
        let table = self.table();
        let nodes = self.walk()?;
        let all = table.scan_entries();
        if nodes.len() != all.len() {
            return Err(format!(
                "{} slots occupied but {} reachable",
                all.len(),
                nodes.len()
            ));
        }
        let mut colors: HashMap<u64, u8> = HashMap::new();
        for e in &all {
            if e.entry.dirty {
                return Err(format!("dirty entry at quiescence: {:?}", e.entry));
            }
            let bit = 1u8 << e.entry.color;
            let seen = colors.entry(table.hash_of(e).get()).or_default();
            if *seen & bit != 0 {
                return Err(format!("duplicate color {} at {:?}", e.entry.color, e.entry));
            }
            *seen |= bit;
        }

        // leaves in key order, with the symbols of their names
        let mut leaves: Vec<(Vec<u8>, Vec<Symbol>, Locator)> = Vec::new();
        let mut by_loc: HashMap<Locator, usize> = HashMap::new();
        for (name, node) in &nodes {
            if let Node::Leaf { .. } = node.entry.node {
                let key = self.record_of(node).key().to_vec();
                if !encode_symbols(&key).starts_with(name) {
                    return Err(format!("leaf {name:?} holds key {key:?}"));
                }
                leaves.push((key, name.clone(), table.locator_of(node)));
            }
        }
        leaves.sort();
        for (i, (_, _, loc)) in leaves.iter().enumerate() {
            by_loc.insert(*loc, i);
        }

        // every leaf sits at its unique prefix
        let syms: Vec<Vec<Symbol>> = leaves.iter().map(|l| encode_symbols(&l.0)).collect();
        for i in 0..leaves.len() {
            let mut lcp = 0;
            if i > 0 {
                lcp = lcp.max(common_prefix_len(&syms[i - 1], &syms[i]));
            }
            if i + 1 < leaves.len() {
                lcp = lcp.max(common_prefix_len(&syms[i], &syms[i + 1]));
            }
            if leaves[i].1.len() != lcp + 1 {
                return Err(format!(
                    "leaf for {:?} at depth {}, unique prefix is {}",
                    leaves[i].0,
                    leaves[i].1.len(),
                    lcp + 1
                ));
            }
        }

        // subtree maxima
        let index_of = |loc: Option<Locator>| loc.and_then(|l| by_loc.get(&l).copied());
        for (name, node) in &nodes {
            let expected = leaves
                .iter()
                .rposition(|(_, n, _)| n.starts_with(name));
            match node.entry.node {
                Node::Leaf { .. } => {}
                Node::Internal { max_leaf, .. }
                | Node::Jump { max_leaf, .. }
                | Node::Root { max_leaf, .. } => {
                    if index_of(max_leaf) != expected || (max_leaf.is_some() && expected.is_none()) {
                        return Err(format!(
                            "max of {name:?} is {max_leaf:?}, expected leaf #{expected:?}"
                        ));
                    }
                }
            }
        }

        // leaf list
        let root = table.read_root();
        let Node::Root { head, .. } = root.entry.node else {
            return Err("root slot does not hold the root".into());
        };
        let mut cursor = head;
        for (i, (key, _, loc)) in leaves.iter().enumerate() {
            if cursor != Some(*loc) {
                return Err(format!("list position {i} is {cursor:?}, expected {key:?}"));
            }
            let leaf = table.resolve(cursor).ok_or("list locator does not resolve")?;
            let Node::Leaf { next, .. } = leaf.entry.node else {
                return Err("list reaches a non-leaf".into());
            };
            cursor = next;
        }
        if cursor.is_some() {
            return Err("list continues past the last leaf".into());
        }
        Ok(())
    }
}
