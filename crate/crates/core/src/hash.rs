//! The peelable prefix hash and the two-bucket mapping.
//!
//! A prefix `x` hashes to `h(x)` in `[0, S*t)`:
//!
//! ```text
//! h(empty) = 0
//! h(x.c)   = (h(x) ^ c) / R  +  (S*t / R) * ((h(x) ^ c) mod R)
//! ```
//!
//! The map is a bijection of `h(x) ^ c`, so the parent hash can be recovered
//! from a child hash and its last symbol (`peel`). The high part `h / t`
//! selects the primary bucket and the low part `h mod t` is the tag. The
//! secondary bucket is the primary displaced by `M[tag]`, where `M` is a table
//! of `t` seeded random offsets in `[0, S)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::keycodec::{Symbol, ALPHABET_SIZE};

/// Size of the tag space.
pub const TAG_SPACE: u64 = 16;

/// Peel radix, a power of two.
pub const PEEL_RADIX: u64 = 32;

/// Hash values are stored in 29-bit locator fields; one value is reserved
/// as the null locator.
pub const HASH_BITS: u32 = 29;

/// Smallest supported bucket count.
pub const MIN_BUCKETS: usize = 64;

/// Largest supported bucket count.
pub const MAX_BUCKETS: usize = ((1u64 << HASH_BITS) / TAG_SPACE) as usize - 2;

/// Position in `[0, S*t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HashValue(pub u64);

impl HashValue {
    /// Hash of the empty prefix.
    pub const EMPTY: HashValue = HashValue(0);

    pub fn get(self) -> u64 {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct HashParams {
    buckets: u64,
    space: u64,
    stride: u64,
    displacement: Vec<u64>,
    seed: u64,
}

impl HashParams {
    /// Parameters for `buckets` buckets with the displacement table drawn
    /// from a ChaCha stream seeded by `seed`.
    pub fn new(buckets: usize, seed: u64) -> Result<Self> {
        Self::check_buckets(buckets)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let displacement = (0..TAG_SPACE)
            .map(|_| rng.gen_range(0..buckets as u64))
            .collect();
        Ok(Self::build(buckets, displacement, seed))
    }

    /// Parameters with an explicit displacement table. Used for fixtures.
    pub fn with_displacements(buckets: usize, displacement: Vec<u64>) -> Result<Self> {
        Self::check_buckets(buckets)?;
        assert_eq!(displacement.len(), TAG_SPACE as usize, "one offset per tag");
        assert!(
            displacement.iter().all(|&m| m < buckets as u64),
            "offsets must be below the bucket count"
        );
        Ok(Self::build(buckets, displacement, 0))
    }

    fn check_buckets(buckets: usize) -> Result<()> {
        if !(MIN_BUCKETS..=MAX_BUCKETS).contains(&buckets) || !buckets.is_multiple_of(2) {
            return Err(Error::InvalidCapacity(buckets));
        }
        Ok(())
    }

    fn build(buckets: usize, displacement: Vec<u64>, seed: u64) -> Self {
        let space = buckets as u64 * TAG_SPACE;
        debug_assert_eq!(space % PEEL_RADIX, 0);
        debug_assert_eq!(space % ALPHABET_SIZE as u64, 0);
        Self {
            buckets: buckets as u64,
            space,
            stride: space / PEEL_RADIX,
            displacement,
            seed,
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets as usize
    }

    /// `S * t`, the size of the hash range.
    pub fn space(&self) -> u64 {
        self.space
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn displacement(&self, tag: u8) -> u64 {
        self.displacement[tag as usize]
    }

    /// Hash of `x.c` given the hash of `x`.
    #[inline]
    pub fn extend(&self, parent: HashValue, c: Symbol) -> HashValue {
        let y = parent.0 ^ c as u64;
        HashValue(y / PEEL_RADIX + self.stride * (y % PEEL_RADIX))
    }

    /// Hash of `x` given the hash of `x.c` and `c`.
    #[inline]
    pub fn peel(&self, child: HashValue, c: Symbol) -> HashValue {
        let y = child.0;
        HashValue(c as u64 ^ (PEEL_RADIX * (y % self.stride) + y * PEEL_RADIX / self.space))
    }

    /// Hash of a whole symbol string.
    pub fn hash_of(&self, symbols: &[Symbol]) -> HashValue {
        symbols
            .iter()
            .fold(HashValue::EMPTY, |h, &c| self.extend(h, c))
    }

    /// Hashes of every prefix: element `i` is the hash of `symbols[..i]`.
    pub fn prefix_hashes(&self, symbols: &[Symbol], out: &mut Vec<HashValue>) {
        out.clear();
        out.reserve(symbols.len() + 1);
        let mut h = HashValue::EMPTY;
        out.push(h);
        for &c in symbols {
            h = self.extend(h, c);
            out.push(h);
        }
    }

    #[inline]
    pub fn tag(&self, h: HashValue) -> u8 {
        (h.0 % TAG_SPACE) as u8
    }

    /// Primary and secondary bucket of `h`.
    #[inline]
    pub fn buckets_for(&self, h: HashValue) -> (usize, usize) {
        let b1 = h.0 / TAG_SPACE;
        let b2 = (b1 + self.displacement[(h.0 % TAG_SPACE) as usize]) % self.buckets;
        (b1 as usize, b2 as usize)
    }

    /// The other bucket of an entry currently in `current`.
    #[inline]
    pub fn alternate_bucket(&self, current: usize, tag: u8, is_primary: bool) -> usize {
        let m = self.displacement[tag as usize];
        let cur = current as u64;
        let alt = if is_primary {
            (cur + m) % self.buckets
        } else {
            (cur + self.buckets - m) % self.buckets
        };
        alt as usize
    }

    /// Recovers the full hash of an entry from where it sits and its tag.
    #[inline]
    pub fn hash_at(&self, bucket: usize, tag: u8, is_primary: bool) -> HashValue {
        let primary = if is_primary {
            bucket
        } else {
            self.alternate_bucket(bucket, tag, false)
        };
        HashValue(primary as u64 * TAG_SPACE + tag as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fixture() -> HashParams {
        let mut m = vec![0u64; 16];
        m[0] = 7;
        HashParams::with_displacements(1024, m).unwrap()
    }

    #[test]
    fn extend_examples() {
        let p = fixture();
        assert_eq!(p.extend(HashValue(0), 5), HashValue(2560));
        assert_eq!(p.extend(HashValue(2560), 3), HashValue(1616));
        assert_eq!(p.extend(HashValue(0), 0), HashValue(0));
    }

    #[test]
    fn peel_examples() {
        let p = fixture();
        assert_eq!(p.peel(HashValue(2560), 5), HashValue(0));
        assert_eq!(p.peel(HashValue(1616), 3), HashValue(2560));
    }

    #[test]
    fn bucket_examples() {
        let p = fixture();
        assert_eq!(p.buckets_for(HashValue(2560)), (160, 167));
        assert_eq!(p.buckets_for(HashValue(0)), (0, 7));
        // tag 1 has a zero offset: both choices coincide
        assert_eq!(p.buckets_for(HashValue(1)), (0, 0));
        assert_eq!(p.alternate_bucket(160, 0, true), 167);
        assert_eq!(p.alternate_bucket(167, 0, false), 160);
    }

    #[test]
    fn alternate_is_an_involution() {
        let p = HashParams::new(2048, 9).unwrap();
        for b in 0..2048 {
            for tag in 0..16u8 {
                let a = p.alternate_bucket(b, tag, true);
                assert_eq!(p.alternate_bucket(a, tag, false), b);
            }
        }
    }

    #[test]
    fn peel_exhaustive_small_table() {
        let p = HashParams::new(64, 1).unwrap();
        for h in 0..p.space() {
            for c in 0..32u8 {
                let e = p.extend(HashValue(h), c);
                assert!(e.0 < p.space());
                assert_eq!(p.peel(e, c), HashValue(h));
            }
        }
    }

    #[test]
    fn peel_random_large_table() {
        let p = HashParams::new(1 << 20, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let h = HashValue(rng.gen_range(0..p.space()));
            let c = rng.gen_range(0..32u8);
            assert_eq!(p.peel(p.extend(h, c), c), h);
        }
    }

    #[test]
    fn slot_position_recovers_hash() {
        let p = HashParams::new(4096, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let h = HashValue(rng.gen_range(0..p.space()));
            let (b1, b2) = p.buckets_for(h);
            let tag = p.tag(h);
            assert_eq!(p.hash_at(b1, tag, true), h);
            assert_eq!(p.hash_at(b2, tag, false), h);
        }
    }

    #[test]
    fn capacity_validation() {
        assert!(HashParams::new(63, 0).is_err());
        assert!(HashParams::new(66, 0).is_ok());
        assert!(HashParams::new(65, 0).is_err());
        assert!(HashParams::new(MAX_BUCKETS, 0).is_ok());
        assert!(HashParams::new(MAX_BUCKETS + 2, 0).is_err());
    }

    #[test]
    fn seeded_displacements_are_reproducible() {
        let a = HashParams::new(1024, 42).unwrap();
        let b = HashParams::new(1024, 42).unwrap();
        assert_eq!(a.displacement, b.displacement);
        assert!(a.displacement.iter().all(|&m| m < 1024));
    }
}
