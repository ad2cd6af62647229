//! Zipfian item chooser in the style of the YCSB generator.

use rand::Rng;

/// Draws integers in `[0, items)`; low values are hot. [`Scrambled`] spreads
/// the hot values over the range.
#[derive(Clone, Debug)]
pub struct Zipfian {
    items: u64,
    theta: f64,
    alpha: f64,
    zetan: f64,
    eta: f64,
}

pub const YCSB_THETA: f64 = 0.99;

fn zeta(n: u64, theta: f64) -> f64 {
    (1..=n).map(|i| 1.0 / (i as f64).powf(theta)).sum()
}

impl Zipfian {
    pub fn new(items: u64, theta: f64) -> Self {
        assert!(items >= 1);
        let zetan = zeta(items, theta);
        let zeta2 = zeta(2, theta);
        Self {
            items,
            theta,
            alpha: 1.0 / (1.0 - theta),
            zetan,
            eta: (1.0 - (2.0 / items as f64).powf(1.0 - theta)) / (1.0 - zeta2 / zetan),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        let u: f64 = rng.gen();
        let uz = u * self.zetan;
        if uz < 1.0 {
            return 0;
        }
        if uz < 1.0 + 0.5f64.powf(self.theta) {
            return 1.min(self.items - 1);
        }
        let v = (self.items as f64 * (self.eta * u - self.eta + 1.0).powf(self.alpha)) as u64;
        v.min(self.items - 1)
    }
}

/// Zipfian ranks hashed over the item range.
#[derive(Clone, Debug)]
pub struct Scrambled {
    inner: Zipfian,
}

impl Scrambled {
    pub fn new(items: u64) -> Self {
        Self {
            inner: Zipfian::new(items, YCSB_THETA),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        fnv64(self.inner.sample(rng)) % self.inner.items
    }
}

fn fnv64(x: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in x.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn skewed_towards_low_ranks() {
        let z = Zipfian::new(1000, YCSB_THETA);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = vec![0u32; 1000];
        for _ in 0..100_000 {
            counts[z.sample(&mut rng) as usize] += 1;
        }
        // rank 0 gets 1/zeta(1000) of the mass, about 13%
        let p0 = counts[0] as f64 / 100_000.0;
        assert!((p0 - 1.0 / zeta(1000, YCSB_THETA)).abs() < 0.01, "{p0}");
        assert!(counts[0] > counts[10] && counts[10] > counts[500]);
    }

    #[test]
    fn scrambled_stays_in_range() {
        let z = Scrambled::new(37);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000).all(|_| z.sample(&mut rng) < 37));
    }
}
