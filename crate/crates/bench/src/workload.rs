//! YCSB-style workloads.

use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::index::OrderedIndex;
use crate::report::{OpCounts, PhaseReport};
use crate::zipf::Scrambled;
use crate::BenchError;

/// Lookups in workload D go to this many most recent inserts.
pub const RECENT_WINDOW: usize = 10_000;

pub const MAX_SCAN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workload {
    Load,
    A,
    B,
    C,
    D,
    E,
    F,
}

impl FromStr for Workload {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "load" => Self::Load,
            "a" => Self::A,
            "b" => Self::B,
            "c" => Self::C,
            "d" => Self::D,
            "e" => Self::E,
            "f" => Self::F,
            _ => return Err(BenchError::Config(format!("unknown workload {s:?}"))),
        })
    }
}

/// Fractions of each operation type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mix {
    pub lookup: f64,
    pub update: f64,
    pub insert: f64,
    pub scan: f64,
    pub rmw: f64,
}

impl Workload {
    pub fn mix(self) -> Mix {
        let m = |lookup, update, insert, scan, rmw| Mix {
            lookup,
            update,
            insert,
            scan,
            rmw,
        };
        match self {
            Self::Load => m(0.0, 0.0, 1.0, 0.0, 0.0),
            Self::A => m(0.5, 0.5, 0.0, 0.0, 0.0),
            Self::B => m(0.95, 0.05, 0.0, 0.0, 0.0),
            Self::C => m(1.0, 0.0, 0.0, 0.0, 0.0),
            Self::D => m(0.95, 0.0, 0.05, 0.0, 0.0),
            Self::E => m(0.0, 0.0, 0.05, 0.95, 0.0),
            Self::F => m(0.5, 0.0, 0.0, 0.0, 0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Load => "LOAD",
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::D => "D",
            Self::E => "E",
            Self::F => "F",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Distribution {
    #[default]
    Uniform,
    Zipfian,
}

#[derive(Clone, Debug)]
pub struct WorkloadSpec {
    pub workload: Workload,
    /// Operations in the measured phase. Ignored by LOAD, which inserts the
    /// whole dataset.
    pub op_count: usize,
    pub threads: usize,
    pub distribution: Distribution,
    pub seed: u64,
}

/// One operation; keys are positions in the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Insert(usize),
    Lookup(usize),
    Update(usize, u64),
    Scan(usize, usize),
    ReadModifyWrite(usize),
}

/// What an operation returned. Scans are summarised by length and a digest
/// of the pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Inserted(bool),
    Found(Option<u64>),
    Updated(bool),
    Scanned { len: usize, digest: u64 },
    Modified(Option<u64>),
}

/// Keys loaded before the measured phase, and those held back for its
/// inserts.
pub fn split_for_inserts(spec: &WorkloadSpec, n: usize) -> usize {
    let mix = spec.workload.mix();
    if spec.workload == Workload::Load || mix.insert == 0.0 {
        return n;
    }
    let wanted = (spec.op_count as f64 * mix.insert * 1.2).ceil() as usize + 16;
    n - wanted.min(n / 2)
}

/// Counters shared by the workers of one phase.
pub struct Cursor {
    n: usize,
    preload: usize,
    next_insert: AtomicUsize,
    inserted: AtomicUsize,
    zipf: Option<Scrambled>,
}

impl Cursor {
    pub fn new(n: usize, preload: usize, distribution: Distribution) -> Self {
        Self {
            n,
            preload,
            next_insert: AtomicUsize::new(preload),
            inserted: AtomicUsize::new(preload),
            zipf: (distribution == Distribution::Zipfian && preload > 0)
                .then(|| Scrambled::new(preload as u64)),
        }
    }

    fn existing(&self, rng: &mut ChaCha8Rng) -> usize {
        match &self.zipf {
            Some(z) => z.sample(rng) as usize,
            None => rng.gen_range(0..self.inserted.load(Ordering::Relaxed).max(1)),
        }
    }

    fn recent(&self, rng: &mut ChaCha8Rng) -> usize {
        let hi = self.inserted.load(Ordering::Relaxed).max(1);
        rng.gen_range(hi.saturating_sub(RECENT_WINDOW)..hi)
    }

    fn claim_insert(&self, rng: &mut ChaCha8Rng) -> usize {
        let idx = self.next_insert.fetch_add(1, Ordering::Relaxed);
        if idx < self.n {
            idx
        } else {
            // reserve used up: repeat an existing key
            self.existing(rng)
        }
    }

    fn published(&self, idx: usize) {
        if idx >= self.preload {
            self.inserted.fetch_max(idx + 1, Ordering::Relaxed);
        }
    }
}

/// Per-worker operation source.
pub struct OpStream {
    workload: Workload,
    mix: Mix,
    rng: ChaCha8Rng,
}

impl OpStream {
    pub fn new(workload: Workload, seed: u64, worker: usize) -> Self {
        let stream = seed ^ (worker as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        Self {
            workload,
            mix: workload.mix(),
            rng: ChaCha8Rng::seed_from_u64(stream),
        }
    }

    pub fn next_op(&mut self, cursor: &Cursor) -> Op {
        let m = self.mix;
        let u: f64 = self.rng.gen();
        let rng = &mut self.rng;
        if u < m.insert {
            return Op::Insert(cursor.claim_insert(rng));
        }
        if u < m.insert + m.lookup {
            let idx = if self.workload == Workload::D {
                cursor.recent(rng)
            } else {
                cursor.existing(rng)
            };
            return Op::Lookup(idx);
        }
        if u < m.insert + m.lookup + m.update {
            let idx = cursor.existing(rng);
            return Op::Update(idx, rng.gen());
        }
        if u < m.insert + m.lookup + m.update + m.scan {
            let idx = cursor.existing(rng);
            return Op::Scan(idx, rng.gen_range(1..=MAX_SCAN));
        }
        Op::ReadModifyWrite(cursor.existing(rng))
    }
}

fn digest(pairs: &[(Vec<u8>, u64)]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (k, v) in pairs {
        for &b in k.iter().chain(&v.to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Executes one operation and tallies it.
pub fn apply<I: OrderedIndex + ?Sized>(
    index: &I,
    keys: &[Vec<u8>],
    cursor: &Cursor,
    op: Op,
    counts: &mut OpCounts,
    scratch: &mut Vec<(Vec<u8>, u64)>,
) -> Result<Outcome, BenchError> {
    Ok(match op {
        Op::Insert(i) => {
            let fresh = index.insert(&keys[i], i as u64).map_err(BenchError::from)?;
            counts.inserts += 1;
            counts.inserted_new += fresh as u64;
            cursor.published(i);
            Outcome::Inserted(fresh)
        }
        Op::Lookup(i) => {
            let v = index.get(&keys[i]);
            counts.lookups += 1;
            counts.found += v.is_some() as u64;
            Outcome::Found(v)
        }
        Op::Update(i, v) => {
            counts.updates += 1;
            Outcome::Updated(index.update(&keys[i], v))
        }
        Op::Scan(i, n) => {
            index.scan(&keys[i], n, scratch);
            counts.scans += 1;
            counts.scanned += scratch.len() as u64;
            Outcome::Scanned {
                len: scratch.len(),
                digest: digest(scratch),
            }
        }
        Op::ReadModifyWrite(i) => {
            counts.rmws += 1;
            Outcome::Modified(index.read_modify_write(&keys[i]))
        }
    })
}

/// Inserts `keys` with `threads` workers.
pub fn load<I: OrderedIndex>(index: &I, keys: &[Vec<u8>], threads: usize) -> Result<PhaseReport, BenchError> {
    let threads = threads.max(1);
    let start = Instant::now();
    let results: Vec<Result<OpCounts, BenchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let mut c = OpCounts::default();
                    for i in (t..keys.len()).step_by(threads) {
                        let fresh = index.insert(&keys[i], i as u64)?;
                        c.inserts += 1;
                        c.inserted_new += fresh as u64;
                    }
                    Ok(c)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let seconds = start.elapsed().as_secs_f64();
    let mut counts = OpCounts::default();
    for r in results {
        counts.merge(&r?);
    }
    Ok(PhaseReport {
        name: "load".into(),
        ops: keys.len() as u64,
        seconds,
        counts,
    })
}

/// Runs the measured phase against an index that already holds
/// `keys[..preload]`.
pub fn run_phase<I: OrderedIndex>(
    index: &I,
    keys: &[Vec<u8>],
    preload: usize,
    spec: &WorkloadSpec,
) -> Result<PhaseReport, BenchError> {
    let threads = spec.threads.max(1);
    let cursor = Cursor::new(keys.len(), preload, spec.distribution);
    let start = Instant::now();
    let results: Vec<Result<OpCounts, BenchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let cursor = &cursor;
                let ops = spec.op_count / threads + usize::from(t < spec.op_count % threads);
                s.spawn(move || {
                    let mut stream = OpStream::new(spec.workload, spec.seed, t);
                    let mut counts = OpCounts::default();
                    let mut scratch = Vec::with_capacity(MAX_SCAN);
                    for _ in 0..ops {
                        let op = stream.next_op(cursor);
                        apply(index, keys, cursor, op, &mut counts, &mut scratch)?;
                    }
                    Ok(counts)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let seconds = start.elapsed().as_secs_f64();
    let mut counts = OpCounts::default();
    for r in results {
        counts.merge(&r?);
    }
    Ok(PhaseReport {
        name: spec.workload.name().to_ascii_lowercase(),
        ops: spec.op_count as u64,
        seconds,
        counts,
    })
}

/// Loads the index and, unless the workload is LOAD, runs the measured phase.
pub fn run<I: OrderedIndex>(index: &I, keys: &[Vec<u8>], spec: &WorkloadSpec) -> Result<Vec<PhaseReport>, BenchError> {
    let preload = split_for_inserts(spec, keys.len());
    let mut phases = vec![load(index, &keys[..preload], spec.threads)?];
    if spec.workload != Workload::Load {
        phases.push(run_phase(index, keys, preload, spec)?);
    }
    Ok(phases)
}

/// First position where the two indexes answer the same single-threaded
/// operation stream differently.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub op_index: usize,
    pub op: Op,
    pub expected: Outcome,
    pub actual: Outcome,
}

/// Runs `spec` single-threaded against `index` and `reference` in lockstep.
pub fn run_differential<I: OrderedIndex, R: OrderedIndex>(
    index: &I,
    reference: &R,
    keys: &[Vec<u8>],
    spec: &WorkloadSpec,
) -> Result<Option<Divergence>, BenchError> {
    let preload = split_for_inserts(spec, keys.len());
    let cursor = Cursor::new(keys.len(), 0, spec.distribution);
    let mut stream = OpStream::new(spec.workload, spec.seed, 0);
    let (mut ca, mut cb) = (OpCounts::default(), OpCounts::default());
    let (mut sa, mut sb) = (Vec::new(), Vec::new());
    let mut op_index = 0;
    for op in (0..preload).map(Op::Insert) {
        let expected = apply(reference, keys, &cursor, op, &mut cb, &mut sb)?;
        let actual = apply(index, keys, &cursor, op, &mut ca, &mut sa)?;
        if expected != actual {
            return Ok(Some(Divergence {
                op_index,
                op,
                expected,
                actual,
            }));
        }
        op_index += 1;
    }
    if spec.workload == Workload::Load {
        return Ok(None);
    }
    let cursor = Cursor::new(keys.len(), preload, spec.distribution);
    for _ in 0..spec.op_count {
        let op = stream.next_op(&cursor);
        let expected = apply(reference, keys, &cursor, op, &mut cb, &mut sb)?;
        let actual = apply(index, keys, &cursor, op, &mut ca, &mut sa)?;
        if expected != actual {
            return Ok(Some(Divergence {
                op_index,
                op,
                expected,
                actual,
            }));
        }
        op_index += 1;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_random;
    use crate::index::Reference;
    use cuckoo_trie::CuckooTrie;

    fn spec(workload: Workload, ops: usize) -> WorkloadSpec {
        WorkloadSpec {
            workload,
            op_count: ops,
            threads: 1,
            distribution: Distribution::Uniform,
            seed: 5,
        }
    }

    #[test]
    fn mixes_sum_to_one() {
        for w in [Workload::Load, Workload::A, Workload::B, Workload::C, Workload::D, Workload::E, Workload::F] {
            let m = w.mix();
            let total = m.lookup + m.update + m.insert + m.scan + m.rmw;
            assert!((total - 1.0).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn closed_world_lookups_all_hit() {
        let d = generate_random(8, 20_000, 1);
        let trie = CuckooTrie::new(CuckooTrie::buckets_for_keys(d.len(), 0.85), 1).unwrap();
        let phases = run(&trie, &d.keys, &spec(Workload::C, 50_000)).unwrap();
        assert_eq!(phases[0].counts.inserted_new, 20_000);
        assert_eq!(phases[1].counts.lookups, 50_000);
        assert_eq!(phases[1].counts.found, 50_000);
    }

    #[test]
    fn op_counts_add_up() {
        let d = generate_random(8, 5_000, 2);
        for w in [Workload::A, Workload::B, Workload::D, Workload::E, Workload::F] {
            let trie = CuckooTrie::new(CuckooTrie::buckets_for_keys(d.len(), 0.8), 2).unwrap();
            let phases = run(&trie, &d.keys, &spec(w, 3_000)).unwrap();
            let c = &phases[1].counts;
            assert_eq!(c.total(), 3_000, "{w:?}");
            if w == Workload::E {
                assert!(c.scans > 2_700 && c.scanned >= c.scans);
            }
        }
    }

    #[test]
    fn trie_and_reference_agree_on_every_workload() {
        let d = generate_random(8, 4_000, 3);
        for w in [Workload::Load, Workload::A, Workload::B, Workload::C, Workload::D, Workload::E, Workload::F] {
            let trie = CuckooTrie::new(CuckooTrie::buckets_for_keys(d.len(), 0.8), 3).unwrap();
            let reference = Reference::new();
            assert_eq!(run_differential(&trie, &reference, &d.keys, &spec(w, 5_000)).unwrap(), None, "{w:?}");
        }
    }

    #[test]
    fn recent_lookups_stay_in_window() {
        let cursor = Cursor::new(50_000, 30_000, Distribution::Uniform);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let i = cursor.recent(&mut rng);
            assert!((20_000..30_000).contains(&i));
        }
    }
}
