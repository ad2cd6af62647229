//! Byte keys rendered as sequences of 5-bit symbols.
//!
//! The key's bit string is cut into 5-bit chunks, most significant bit
//! first, and the final chunk is padded with zero bits. On a byte-prefix-free
//! key set the encoding is injective, order preserving and symbol-prefix-free,
//! which is all the trie needs.

use std::fmt;

use crate::error::{Error, Result};

/// Bits per symbol.
pub const SYMBOL_BITS: usize = 5;

/// Number of distinct symbols.
pub const ALPHABET_SIZE: usize = 1 << SYMBOL_BITS;

/// A single symbol, always in `[0, ALPHABET_SIZE)`.
pub type Symbol = u8;

/// A key as the trie sees it.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolKey {
    symbols: Vec<Symbol>,
    source_len_bits: usize,
}

impl SymbolKey {
    /// Encodes a non-empty byte key.
    pub fn encode(key: &[u8]) -> Result<Self> {
        if key.is_empty() {
            return Err(Error::EmptyKey);
        }
        Ok(Self {
            symbols: encode_symbols(key),
            source_len_bits: key.len() * 8,
        })
    }

    /// Builds a key directly from symbols. Each symbol must be below 32.
    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        assert!(
            symbols.iter().all(|&s| (s as usize) < ALPHABET_SIZE),
            "symbol out of range"
        );
        let source_len_bits = symbols.len() * SYMBOL_BITS;
        Self {
            symbols,
            source_len_bits,
        }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn source_len_bits(&self) -> usize {
        self.source_len_bits
    }

    /// The first `i` symbols. Panics if `i > self.len()`.
    pub fn prefix(&self, i: usize) -> SymbolKey {
        assert!(
            i <= self.symbols.len(),
            "prefix length {i} exceeds key length {}",
            self.symbols.len()
        );
        SymbolKey {
            symbols: self.symbols[..i].to_vec(),
            source_len_bits: self.source_len_bits.min(i * SYMBOL_BITS),
        }
    }
}

impl fmt::Debug for SymbolKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymbolKey{:?}", self.symbols)
    }
}

/// MSB-first 5-bit chunking of `key`, zero padded.
pub fn encode_symbols(key: &[u8]) -> Vec<Symbol> {
    let total_bits = key.len() * 8;
    let n = total_bits.div_ceil(SYMBOL_BITS);
    let mut out = Vec::with_capacity(n);
    let mut acc: u32 = 0;
    let mut acc_bits = 0usize;
    for &byte in key {
        acc = (acc << 8) | byte as u32;
        acc_bits += 8;
        while acc_bits >= SYMBOL_BITS {
            acc_bits -= SYMBOL_BITS;
            out.push(((acc >> acc_bits) & 0x1f) as u8);
        }
        acc &= (1 << acc_bits) - 1;
    }
    if acc_bits > 0 {
        out.push(((acc << (SYMBOL_BITS - acc_bits)) & 0x1f) as u8);
    }
    debug_assert_eq!(out.len(), n);
    out
}

/// Length of the longest common prefix of two symbol strings.
pub fn common_prefix_len(a: &[Symbol], b: &[Symbol]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}
