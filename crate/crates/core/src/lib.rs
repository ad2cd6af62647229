//! An ordered in-memory index that stores a trie inside a bucketized cuckoo
//! hash table.
//!
//! Every trie node is stored under the hash of its name, the key prefix that
//! leads to it. Because those hashes can be computed from the search key
//! alone, a lookup can issue memory requests for all levels of its path at
//! once instead of chasing pointers one level at a time. The table keeps no
//! copies of keys: an entry holds its last symbol, and the hash function is
//! invertible one symbol at a time, so a child's hash and last symbol
//! identify its parent's hash. Small per-hash colors disambiguate collisions.
//!
//! ```
//! use cuckoo_trie::CuckooTrie;
//!
//! let trie = CuckooTrie::new(1024, 42).unwrap();
//! trie.insert(b"apple\0", 1).unwrap();
//! trie.insert(b"banana\0", 2).unwrap();
//! assert_eq!(trie.get(b"apple\0").unwrap().unwrap().value(), 1);
//! let keys: Vec<_> = trie.iter().map(|r| r.key().to_vec()).collect();
//! assert_eq!(keys, vec![b"apple\0".to_vec(), b"banana\0".to_vec()]);
//! ```
//!
//! Keys must be prefix-free. Variable-length keys are usually terminated
//! with a byte that cannot occur inside them.

pub mod entry;
pub mod error;
pub mod hash;
pub mod keycodec;
pub mod prefetch;
pub mod records;
pub mod scan;
pub mod table;
pub mod trie;
pub mod verify;

pub use entry::{Locator, RecordRef};
pub use error::{Error, Result};
pub use keycodec::SymbolKey;
pub use records::Record;
pub use scan::RangeIter;
pub use trie::{Config, CuckooTrie, DeleteOutcome, InsertOutcome, SearchOutcome};
pub use verify::{LogicalTrie, Stats};
