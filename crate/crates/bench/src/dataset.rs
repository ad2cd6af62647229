//! Key sets: generated random keys or keys read from a file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

/// Appended to variable-length keys so that no key is a prefix of another.
pub const TERMINATOR: u8 = 0x00;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetSource {
    Rand8,
    Rand16,
    File(PathBuf),
}

impl FromStr for DatasetSource {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "rand-8" => Ok(Self::Rand8),
            "rand-16" => Ok(Self::Rand16),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(p.into())),
                _ => Err(BenchError::Config(format!("unknown dataset {s:?}"))),
            },
        }
    }
}

/// On-disk layout of a key file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// One key per line; a terminator is appended to each.
    Lines,
    /// Back-to-back keys of a fixed width.
    Fixed(usize),
}

impl FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        if s == "lines" {
            return Ok(Self::Lines);
        }
        s.strip_prefix("fixed:")
            .and_then(|w| w.parse().ok())
            .filter(|&w: &usize| w > 0)
            .map(Self::Fixed)
            .ok_or_else(|| BenchError::Config(format!("unknown format {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    /// Distinct keys in random order.
    pub keys: Vec<Vec<u8>>,
    /// Width of every key, when fixed.
    pub key_width: Option<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn mean_key_bytes(&self) -> f64 {
        self.keys.iter().map(Vec::len).sum::<usize>() as f64 / self.len().max(1) as f64
    }
}

/// `n` distinct random 64-bit values in random order.
pub fn random_u64s(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    loop {
        v.sort_unstable();
        v.dedup();
        if v.len() == n {
            break;
        }
        while v.len() < n {
            v.push(rng.gen());
        }
    }
    v.shuffle(&mut rng);
    v
}

/// `n` distinct uniformly random keys of `width` bytes.
pub fn generate_random(width: usize, n: usize, seed: u64) -> Dataset {
    let keys = if width == 8 {
        random_u64s(n, seed)
            .into_iter()
            .map(|x| x.to_be_bytes().to_vec())
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(n);
        let mut keys = Vec::with_capacity(n);
        while keys.len() < n {
            let mut k = vec![0u8; width];
            rng.fill(k.as_mut_slice());
            if seen.insert(k.clone()) {
                keys.push(k);
            }
        }
        keys.shuffle(&mut rng);
        keys
    };
    Dataset {
        name: format!("rand-{width}"),
        keys,
        key_width: Some(width),
    }
}

/// Builds a dataset of at most `n` keys; `format` applies to files only.
pub fn generate(
    source: &DatasetSource,
    n: usize,
    seed: u64,
    format: Format,
) -> Result<Dataset, BenchError> {
    if n == 0 {
        return Err(BenchError::Config("dataset size must be at least 1".into()));
    }
    match source {
        DatasetSource::Rand8 => Ok(generate_random(8, n, seed)),
        DatasetSource::Rand16 => Ok(generate_random(16, n, seed)),
        DatasetSource::File(path) => {
            let mut d = ingest(path, format, seed)?;
            d.keys.truncate(n);
            Ok(d)
        }
    }
}

/// Reads, deduplicates and shuffles the keys of a file.
pub fn ingest(path: &Path, format: Format, seed: u64) -> Result<Dataset, BenchError> {
    let bytes = fs::read(path).map_err(|e| BenchError::Io(path.display().to_string(), e))?;
    let raw: Vec<Vec<u8>> = match format {
        Format::Lines => bytes
            .split(|&b| b == b'\n')
            .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
            .filter(|l| !l.is_empty())
            .map(|l| {
                if l.contains(&TERMINATOR) {
                    return Err(BenchError::Config(format!(
                        "{}: key contains the terminator byte",
                        path.display()
                    )));
                }
                let mut k = l.to_vec();
                k.push(TERMINATOR);
                Ok(k)
            })
            .collect::<Result<_, _>>()?,
        Format::Fixed(w) => {
            if bytes.len() % w != 0 {
                return Err(BenchError::Config(format!(
                    "{}: {} bytes is not a multiple of the key width {w}",
                    path.display(),
                    bytes.len()
                )));
            }
            bytes.chunks_exact(w).map(<[u8]>::to_vec).collect()
        }
    };
    let mut seen = HashSet::with_capacity(raw.len());
    let mut keys: Vec<Vec<u8>> = raw.into_iter().filter(|k| seen.insert(k.clone())).collect();
    if keys.is_empty() {
        return Err(BenchError::Config(format!("{}: no keys", path.display())));
    }
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Dataset {
        name: path.display().to_string(),
        keys,
        key_width: match format {
            Format::Fixed(w) => Some(w),
            Format::Lines => None,
        },
    })
}

/// Writes keys in a format that [`ingest`] reads back.
pub fn export(dataset: &Dataset, path: &Path, format: Format) -> Result<(), BenchError> {
    let mut out = Vec::new();
    for k in &dataset.keys {
        match format {
            Format::Lines => {
                out.extend_from_slice(k.strip_suffix(&[TERMINATOR]).unwrap_or(k));
                out.push(b'\n');
            }
            Format::Fixed(w) => {
                if k.len() != w {
                    return Err(BenchError::Config(format!("key of {} bytes, width {w}", k.len())));
                }
                out.extend_from_slice(k);
            }
        }
    }
    fs::write(path, out).map_err(|e| BenchError::Io(path.display().to_string(), e))
}

fn common_prefix_bits(a: &[u8], b: &[u8]) -> usize {
    match a.iter().zip(b).position(|(x, y)| x != y) {
        Some(i) => i * 8 + (a[i] ^ b[i]).leading_zeros() as usize,
        None => a.len().min(b.len()) * 8,
    }
}

/// Mean length in bits of each key's shortest prefix that no other key
/// shares.
pub fn mean_unique_prefix_bits(keys: &[Vec<u8>]) -> f64 {
    let mut sorted: Vec<&[u8]> = keys.iter().map(Vec::as_slice).collect();
    sorted.sort_unstable();
    let total: usize = (0..sorted.len())
        .map(|i| {
            let mut lcp = 0;
            if i > 0 {
                lcp = lcp.max(common_prefix_bits(sorted[i - 1], sorted[i]));
            }
            if i + 1 < sorted.len() {
                lcp = lcp.max(common_prefix_bits(sorted[i], sorted[i + 1]));
            }
            (lcp + 1).min(sorted[i].len() * 8)
        })
        .sum();
    total as f64 / sorted.len().max(1) as f64
}
