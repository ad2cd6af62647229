//! Random operation streams checked against a reference map.

use std::collections::BTreeSet;
use std::fmt;

use cuckoo_trie::{Config, CuckooTrie};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::index::{OrderedIndex, Reference};

#[derive(Clone, Debug)]
pub struct DiffConfig {
    pub ops: usize,
    pub key_space: usize,
    pub seed: u64,
    pub deletes: bool,
    pub buckets: usize,
    pub prefetch_depth: usize,
    /// Run the trie with subtree maxima left stale on insert.
    pub inject_fault: bool,
}

impl DiffConfig {
    pub fn new(ops: usize, key_space: usize, seed: u64) -> Self {
        Self {
            ops,
            key_space,
            seed,
            deletes: true,
            buckets: 4094,
            prefetch_depth: cuckoo_trie::trie::DEFAULT_PREFETCH_DEPTH,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiffOp {
    Insert(Vec<u8>, u64),
    Lookup(Vec<u8>),
    Delete(Vec<u8>),
    Predecessor(Vec<u8>),
    Scan(Vec<u8>, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiffResult {
    Bool(bool),
    Value(Option<u64>),
    Key(Option<Vec<u8>>),
    Pairs(Vec<(Vec<u8>, u64)>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass {
        ops: usize,
        /// Hash of every result, for comparing runs.
        digest: u64,
    },
    Diverged {
        seed: u64,
        /// The shortest prefix of the stream that shows the divergence.
        prefix: Vec<DiffOp>,
        expected: DiffResult,
        actual: DiffResult,
    },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass { ops, .. } => write!(f, "pass ({ops} ops)"),
            Verdict::Diverged {
                seed,
                prefix,
                expected,
                actual,
            } => {
                writeln!(
                    f,
                    "divergence at op {} (seed {seed}): {:?}",
                    prefix.len() - 1,
                    prefix.last().unwrap()
                )?;
                writeln!(f, "  expected {expected:?}")?;
                writeln!(f, "  actual   {actual:?}")?;
                writeln!(f, "  failing prefix ({} ops):", prefix.len())?;
                for op in prefix.iter().rev().take(20).rev() {
                    writeln!(f, "    {op:?}")?;
                }
                if prefix.len() > 20 {
                    writeln!(f, "    ... {} earlier ops omitted", prefix.len() - 20)?;
                }
                Ok(())
            }
        }
    }
}

/// Fixed-width keys from three families: uniform, with long runs of zero
/// bits in the middle, and with a shared 32-bit head. The latter two force
/// long common prefixes.
pub fn key_space(n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_7973);
    let mut keys = BTreeSet::new();
    while keys.len() < n {
        let x: u64 = rng.gen();
        let k = match rng.gen_range(0..3) {
            0 => x,
            1 => x & 0xff00_0000_000f_ffff,
            _ => 0x5a5a_5a5a_0000_0000 | (x & 0xffff_ffff),
        };
        keys.insert(k.to_be_bytes().to_vec());
    }
    let mut keys: Vec<Vec<u8>> = keys.into_iter().collect();
    rand::seq::SliceRandom::shuffle(keys.as_mut_slice(), &mut rng);
    keys
}

pub fn generate_ops(cfg: &DiffConfig) -> Vec<DiffOp> {
    let keys = key_space(cfg.key_space, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.ops)
        .map(|_| {
            let k = keys[rng.gen_range(0..keys.len())].clone();
            match rng.gen_range(0..20) {
                0..=6 => DiffOp::Insert(k, rng.gen()),
                7..=10 if cfg.deletes => DiffOp::Delete(k),
                7..=10 => DiffOp::Insert(k, rng.gen()),
                11..=15 => DiffOp::Lookup(k),
                16..=17 => DiffOp::Predecessor(k),
                _ => DiffOp::Scan(k, rng.gen_range(0..=20)),
            }
        })
        .collect()
}

fn apply(index: &dyn OrderedIndex, op: &DiffOp, scratch: &mut Vec<(Vec<u8>, u64)>) -> DiffResult {
    match op {
        DiffOp::Insert(k, v) => DiffResult::Bool(index.insert(k, *v).expect("table sized for the key space")),
        DiffOp::Lookup(k) => DiffResult::Value(index.get(k)),
        DiffOp::Delete(k) => DiffResult::Bool(index.delete(k)),
        DiffOp::Predecessor(k) => DiffResult::Key(index.predecessor(k)),
        DiffOp::Scan(k, n) => {
            index.scan(k, *n, scratch);
            DiffResult::Pairs(scratch.clone())
        }
    }
}

pub fn make_trie(cfg: &DiffConfig) -> CuckooTrie {
    let mut config = Config::new(cfg.buckets, cfg.seed).prefetch_depth(cfg.prefetch_depth);
    config.fault_skip_max_leaf_update = cfg.inject_fault;
    CuckooTrie::with_config(config).expect("valid bucket count")
}

/// Applies `ops` to a fresh trie and a reference map; returns the index of
/// the first differing result, or the digest of all results.
pub fn replay(cfg: &DiffConfig, ops: &[DiffOp]) -> Result<u64, (usize, DiffResult, DiffResult)> {
    let trie = make_trie(cfg);
    let reference = Reference::new();
    let mut scratch = Vec::new();
    let mut digest: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, op) in ops.iter().enumerate() {
        let expected = apply(&reference, op, &mut scratch);
        let actual = apply(&trie, op, &mut scratch);
        if expected != actual {
            return Err((i, expected, actual));
        }
        for b in format!("{actual:?}").bytes() {
            digest ^= b as u64;
            digest = digest.wrapping_mul(0x0100_0000_01b3);
        }
    }
    Ok(digest)
}

pub fn differential(cfg: &DiffConfig) -> Verdict {
    let ops = generate_ops(cfg);
    match replay(cfg, &ops) {
        Ok(digest) => Verdict::Pass {
            ops: ops.len(),
            digest,
        },
        Err((i, expected, actual)) => Verdict::Diverged {
            seed: cfg.seed,
            prefix: ops[..=i].to_vec(),
            expected,
            actual,
        },
    }
}
