use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("keys must be non-empty")]
    EmptyKey,

    /// The key is a prefix of a stored key, or a stored key is a prefix of it.
    #[error("key conflicts with a stored key: the key set must be prefix-free")]
    PrefixConflict,

    #[error(
        "hash table is full ({occupied} of {slots} slots in use); \
         the index does not resize, raise the initial capacity"
    )]
    TableFull { occupied: usize, slots: usize },

    #[error("invalid capacity {0}: the bucket count must be even, at least 64 and below 2^25")]
    InvalidCapacity(usize),
}
