//! Hash table entries and their 15-byte packed form.
//!
//! Bit layout of a packed entry (little-endian 120-bit word):
//!
//! ```text
//! 0..3    kind (0 empty, 1 leaf, 2 internal, 3 jump, 4 root)
//! 3..7    tag
//! 7       is_primary
//! 8..13   last_symbol
//! 13..16  color
//! 16..19  parent_color
//! 19      dirty
//! 20      via_jump (child of a jump node, found by color only)
//! 21..    payload
//!   leaf:      record 48 | next 32
//!   internal:  children 32 | max_leaf 32
//!   root:      children 32 | max_leaf 32 | head 32
//!   jump:      size 4 | symbols 12x5 | child_color 3 | max_leaf 32
//! ```
//!
//! A locator takes 32 bits: a 29-bit hash and a 3-bit color. The all-ones
//! hash is the null locator.

use std::fmt;

use crate::hash::{HashValue, HASH_BITS};
use crate::keycodec::Symbol;

/// Bytes per packed entry.
pub const ENTRY_BYTES: usize = 15;

/// Longest edge label a jump node can carry.
pub const MAX_JUMP: usize = 12;

/// Colors available per hash value: two buckets of four slots.
pub const COLORS: u8 = 8;

const NULL_HASH: u64 = (1 << HASH_BITS) - 1;

/// Relocation-stable reference to a node: its name's hash and its color.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Locator {
    pub hash: HashValue,
    pub color: u8,
}

impl Locator {
    /// The root node.
    pub const ROOT: Locator = Locator {
        hash: HashValue::EMPTY,
        color: 0,
    };

    pub fn new(hash: HashValue, color: u8) -> Self {
        debug_assert!(color < COLORS);
        debug_assert!(hash.0 < NULL_HASH);
        Self { hash, color }
    }

    fn pack(loc: Option<Locator>) -> u128 {
        match loc {
            None => NULL_HASH as u128,
            Some(l) => l.hash.0 as u128 | (l.color as u128) << HASH_BITS,
        }
    }

    fn unpack(bits: u128) -> Option<Locator> {
        let hash = (bits as u64) & NULL_HASH;
        if hash == NULL_HASH {
            return None;
        }
        Some(Locator {
            hash: HashValue(hash),
            color: ((bits >> HASH_BITS) & 0x7) as u8,
        })
    }
}

impl fmt::Debug for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}/{}", self.hash.0, self.color)
    }
}

/// Handle of a record in the record store (48 bits).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordRef(pub u64);

impl RecordRef {
    pub const MAX: u64 = (1 << 48) - 1;
}

/// One bit per possible next symbol.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct ChildMap(pub u32);

impl ChildMap {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn of(symbols: &[Symbol]) -> Self {
        let mut m = Self(0);
        for &s in symbols {
            m.insert(s);
        }
        m
    }

    pub fn contains(self, s: Symbol) -> bool {
        self.0 & (1 << s) != 0
    }

    pub fn insert(&mut self, s: Symbol) {
        self.0 |= 1 << s;
    }

    pub fn remove(&mut self, s: Symbol) {
        self.0 &= !(1 << s);
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn highest(self) -> Option<Symbol> {
        (self.0 != 0).then(|| 31 - self.0.leading_zeros() as u8)
    }

    pub fn lowest(self) -> Option<Symbol> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as u8)
    }

    /// Largest member strictly below `s`.
    pub fn highest_below(self, s: Symbol) -> Option<Symbol> {
        ChildMap(self.0 & ((1u32 << s) - 1)).highest()
    }

    pub fn iter(self) -> impl Iterator<Item = Symbol> {
        (0..32u8).filter(move |&s| self.contains(s))
    }
}

impl fmt::Debug for ChildMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Edge label of a jump node.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct JumpLabel {
    len: u8,
    symbols: [Symbol; MAX_JUMP],
}

impl JumpLabel {
    pub fn new(symbols: &[Symbol]) -> Self {
        assert!(
            (1..=MAX_JUMP).contains(&symbols.len()),
            "jump label of {} symbols",
            symbols.len()
        );
        let mut buf = [0; MAX_JUMP];
        buf[..symbols.len()].copy_from_slice(symbols);
        Self {
            len: symbols.len() as u8,
            symbols: buf,
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.symbols[..self.len as usize]
    }

    pub fn get(&self, i: usize) -> Symbol {
        self.as_slice()[i]
    }
}

impl fmt::Debug for JumpLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_slice())
    }
}

/// What a slot holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Leaf {
        record: RecordRef,
        next: Option<Locator>,
    },
    Internal {
        children: ChildMap,
        max_leaf: Option<Locator>,
    },
    Jump {
        label: JumpLabel,
        child_color: u8,
        max_leaf: Option<Locator>,
    },
    /// The empty-name node. Lives at a reserved slot and is never relocated.
    Root {
        children: ChildMap,
        max_leaf: Option<Locator>,
        head: Option<Locator>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Leaf,
    Internal,
    Jump,
    Root,
}

impl Node {
    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Leaf { .. } => NodeKind::Leaf,
            Node::Internal { .. } => NodeKind::Internal,
            Node::Jump { .. } => NodeKind::Jump,
            Node::Root { .. } => NodeKind::Root,
        }
    }

    pub fn max_leaf(&self) -> Option<Locator> {
        match *self {
            Node::Internal { max_leaf, .. }
            | Node::Jump { max_leaf, .. }
            | Node::Root { max_leaf, .. } => max_leaf,
            Node::Leaf { .. } => None,
        }
    }

    pub fn set_max_leaf(&mut self, loc: Option<Locator>) {
        match self {
            Node::Internal { max_leaf, .. }
            | Node::Jump { max_leaf, .. }
            | Node::Root { max_leaf, .. } => *max_leaf = loc,
            Node::Leaf { .. } => panic!("leaves carry no subtree max"),
        }
    }

    /// Child bitmap of a regular node (internal or root).
    pub fn children(&self) -> Option<ChildMap> {
        match *self {
            Node::Internal { children, .. } | Node::Root { children, .. } => Some(children),
            _ => None,
        }
    }

    pub fn children_mut(&mut self) -> &mut ChildMap {
        match self {
            Node::Internal { children, .. } | Node::Root { children, .. } => children,
            _ => panic!("not a regular node"),
        }
    }

    pub fn is_regular(&self) -> bool {
        matches!(self, Node::Internal { .. } | Node::Root { .. })
    }
}

/// A trie node together with the metadata that identifies it in the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub tag: u8,
    pub is_primary: bool,
    pub last_symbol: Symbol,
    pub color: u8,
    pub parent_color: u8,
    pub dirty: bool,
    pub via_jump: bool,
    pub node: Node,
}

impl Entry {
    /// An entry with placement fields zeroed; the table fills them in.
    pub fn new(last_symbol: Symbol, parent_color: u8, via_jump: bool, node: Node) -> Self {
        Self {
            tag: 0,
            is_primary: true,
            last_symbol,
            color: 0,
            parent_color,
            dirty: false,
            via_jump,
            node,
        }
    }

    pub fn kind(&self) -> NodeKind {
        self.node.kind()
    }

    pub fn is_root(&self) -> bool {
        matches!(self.node, Node::Root { .. })
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.node, Node::Leaf { .. })
    }

    pub fn pack(&self) -> [u8; ENTRY_BYTES] {
        let kind: u128 = match self.node {
            Node::Leaf { .. } => 1,
            Node::Internal { .. } => 2,
            Node::Jump { .. } => 3,
            Node::Root { .. } => 4,
        };
        debug_assert!(self.tag < 16 && self.last_symbol < 32);
        debug_assert!(self.color < COLORS && self.parent_color < COLORS);
        let mut w = kind
            | (self.tag as u128) << 3
            | (self.is_primary as u128) << 7
            | (self.last_symbol as u128) << 8
            | (self.color as u128) << 13
            | (self.parent_color as u128) << 16
            | (self.dirty as u128) << 19
            | (self.via_jump as u128) << 20;
        match self.node {
            Node::Leaf { record, next } => {
                debug_assert!(record.0 <= RecordRef::MAX);
                w |= (record.0 as u128) << 21;
                w |= Locator::pack(next) << 69;
            }
            Node::Internal { children, max_leaf } => {
                w |= (children.0 as u128) << 21;
                w |= Locator::pack(max_leaf) << 53;
            }
            Node::Root {
                children,
                max_leaf,
                head,
            } => {
                w |= (children.0 as u128) << 21;
                w |= Locator::pack(max_leaf) << 53;
                w |= Locator::pack(head) << 85;
            }
            Node::Jump {
                label,
                child_color,
                max_leaf,
            } => {
                w |= (label.len as u128) << 21;
                for (i, &s) in label.as_slice().iter().enumerate() {
                    w |= (s as u128) << (25 + 5 * i);
                }
                w |= (child_color as u128) << 85;
                w |= Locator::pack(max_leaf) << 88;
            }
        }
        let bytes = w.to_le_bytes();
        let mut out = [0u8; ENTRY_BYTES];
        out.copy_from_slice(&bytes[..ENTRY_BYTES]);
        out
    }

    /// Decodes a slot; `None` for an empty slot.
    pub fn unpack(bytes: &[u8; ENTRY_BYTES]) -> Option<Entry> {
        let mut buf = [0u8; 16];
        buf[..ENTRY_BYTES].copy_from_slice(bytes);
        let w = u128::from_le_bytes(buf);
        let field = |shift: u32, bits: u32| ((w >> shift) & ((1u128 << bits) - 1)) as u64;
        let node = match w & 0x7 {
            0 => return None,
            1 => Node::Leaf {
                record: RecordRef(field(21, 48)),
                next: Locator::unpack(w >> 69),
            },
            2 => Node::Internal {
                children: ChildMap(field(21, 32) as u32),
                max_leaf: Locator::unpack(w >> 53),
            },
            3 => {
                let len = field(21, 4) as usize;
                let mut symbols = [0u8; MAX_JUMP];
                for (i, s) in symbols.iter_mut().enumerate().take(len) {
                    *s = field(25 + 5 * i as u32, 5) as u8;
                }
                Node::Jump {
                    label: JumpLabel {
                        len: len as u8,
                        symbols,
                    },
                    child_color: field(85, 3) as u8,
                    max_leaf: Locator::unpack(w >> 88),
                }
            }
            4 => Node::Root {
                children: ChildMap(field(21, 32) as u32),
                max_leaf: Locator::unpack(w >> 53),
                head: Locator::unpack(w >> 85),
            },
            k => panic!("corrupt entry kind {k}"),
        };
        Some(Entry {
            tag: field(3, 4) as u8,
            is_primary: field(7, 1) == 1,
            last_symbol: field(8, 5) as u8,
            color: field(13, 3) as u8,
            parent_color: field(16, 3) as u8,
            dirty: field(19, 1) == 1,
            via_jump: field(20, 1) == 1,
            node,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn locator() -> impl Strategy<Value = Option<Locator>> {
        prop_oneof![
            Just(None),
            (0..NULL_HASH, 0..COLORS).prop_map(|(h, c)| Some(Locator::new(HashValue(h), c))),
        ]
    }

    fn node() -> impl Strategy<Value = Node> {
        prop_oneof![
            (0..=RecordRef::MAX, locator()).prop_map(|(r, next)| Node::Leaf {
                record: RecordRef(r),
                next
            }),
            (any::<u32>(), locator()).prop_map(|(c, max_leaf)| Node::Internal {
                children: ChildMap(c),
                max_leaf
            }),
            (proptest::collection::vec(0..32u8, 1..=MAX_JUMP), 0..COLORS, locator()).prop_map(
                |(s, child_color, max_leaf)| Node::Jump {
                    label: JumpLabel::new(&s),
                    child_color,
                    max_leaf
                }
            ),
            (any::<u32>(), locator(), locator()).prop_map(|(c, max_leaf, head)| Node::Root {
                children: ChildMap(c),
                max_leaf,
                head
            }),
        ]
    }

    prop_compose! {
        fn entry()(tag in 0..16u8, is_primary: bool, last_symbol in 0..32u8,
                   color in 0..COLORS, parent_color in 0..COLORS, dirty: bool,
                   via_jump: bool, node in node()) -> Entry {
            Entry { tag, is_primary, last_symbol, color, parent_color, dirty, via_jump, node }
        }
    }

    proptest! {
        #[test]
        fn pack_round_trips(e in entry()) {
            prop_assert_eq!(Entry::unpack(&e.pack()), Some(e));
        }
    }

    #[test]
    fn empty_slot_decodes_to_none() {
        assert_eq!(Entry::unpack(&[0; ENTRY_BYTES]), None);
    }

    #[test]
    fn full_jump_uses_every_bit() {
        let e = Entry {
            tag: 15,
            is_primary: true,
            last_symbol: 31,
            color: 7,
            parent_color: 7,
            dirty: true,
            via_jump: true,
            node: Node::Jump {
                label: JumpLabel::new(&[31; MAX_JUMP]),
                child_color: 7,
                max_leaf: Some(Locator::new(HashValue(NULL_HASH - 1), 7)),
            },
        };
        assert_eq!(Entry::unpack(&e.pack()), Some(e));
    }

    #[test]
    fn child_map_queries() {
        let m = ChildMap::of(&[3, 9, 20]);
        assert_eq!(m.highest(), Some(20));
        assert_eq!(m.lowest(), Some(3));
        assert_eq!(m.highest_below(20), Some(9));
        assert_eq!(m.highest_below(3), None);
        assert_eq!(m.highest_below(0), None);
        assert_eq!(m.len(), 3);
        assert_eq!(ChildMap::of(&[31]).highest(), Some(31));
    }
}
