//! Run reports: a table for people and `key=value` lines for scripts.

use std::fmt::Write;

use cuckoo_trie::Stats;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub lookups: u64,
    pub found: u64,
    pub updates: u64,
    pub inserts: u64,
    pub inserted_new: u64,
    pub scans: u64,
    pub scanned: u64,
    pub rmws: u64,
}

impl OpCounts {
    pub fn merge(&mut self, o: &OpCounts) {
        self.lookups += o.lookups;
        self.found += o.found;
        self.updates += o.updates;
        self.inserts += o.inserts;
        self.inserted_new += o.inserted_new;
        self.scans += o.scans;
        self.scanned += o.scanned;
        self.rmws += o.rmws;
    }

    /// Operations of any type.
    pub fn total(&self) -> u64 {
        self.lookups + self.updates + self.inserts + self.scans + self.rmws
    }
}

#[derive(Clone, Debug)]
pub struct PhaseReport {
    pub name: String,
    pub ops: u64,
    pub seconds: f64,
    pub counts: OpCounts,
}

impl PhaseReport {
    pub fn ops_per_sec(&self) -> f64 {
        self.ops as f64 / self.seconds.max(1e-9)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub workload: String,
    pub dataset: String,
    pub keys: usize,
    pub threads: usize,
    pub seed: u64,
    pub phases: Vec<PhaseReport>,
    pub stats: Option<Stats>,
    /// Set in differential mode.
    pub verdict: Option<String>,
}

impl RunReport {
    pub fn human(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "workload {}  dataset {} ({} keys)  threads {}  seed {}",
            self.workload, self.dataset, self.keys, self.threads, self.seed
        );
        let _ = writeln!(
            s,
            "{:<6} {:>10} {:>9} {:>10} {:>9} {:>9} {:>9} {:>9} {:>8} {:>9} {:>8}",
            "phase", "ops", "seconds", "Mops/s", "lookups", "found", "updates", "inserts", "scans", "scanned", "rmw"
        );
        for p in &self.phases {
            let c = &p.counts;
            let _ = writeln!(
                s,
                "{:<6} {:>10} {:>9.3} {:>10.3} {:>9} {:>9} {:>9} {:>9} {:>8} {:>9} {:>8}",
                p.name,
                p.ops,
                p.seconds,
                p.ops_per_sec() / 1e6,
                c.lookups,
                c.found,
                c.updates,
                c.inserts,
                c.scans,
                c.scanned,
                c.rmws
            );
        }
        if let Some(st) = &self.stats {
            let _ = writeln!(
                s,
                "memory: index {} B (S={} x 64) + records {} B = {} B",
                st.index_bytes,
                st.buckets,
                st.record_bytes,
                st.memory_bytes()
            );
            let _ = writeln!(
                s,
                "nodes: {} leaves, {} internal, {} jump ({:.3} per key), load factor {:.3}",
                st.leaves,
                st.internal,
                st.jumps,
                st.nodes_per_key(),
                st.load_factor()
            );
        }
        if let Some(v) = &self.verdict {
            let _ = writeln!(s, "differential: {v}");
        }
        s
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "workload={}", self.workload);
        let _ = writeln!(s, "dataset={}", self.dataset);
        let _ = writeln!(s, "keys={}", self.keys);
        let _ = writeln!(s, "threads={}", self.threads);
        let _ = writeln!(s, "seed={}", self.seed);
        for p in &self.phases {
            let c = &p.counts;
            let n = &p.name;
            let _ = writeln!(s, "{n}.ops={}", p.ops);
            let _ = writeln!(s, "{n}.seconds={:.6}", p.seconds);
            let _ = writeln!(s, "{n}.ops_per_sec={:.1}", p.ops_per_sec());
            for (k, v) in [
                ("lookups", c.lookups),
                ("found", c.found),
                ("updates", c.updates),
                ("inserts", c.inserts),
                ("inserted_new", c.inserted_new),
                ("scans", c.scans),
                ("scanned", c.scanned),
                ("rmws", c.rmws),
            ] {
                let _ = writeln!(s, "{n}.{k}={v}");
            }
        }
        if let Some(st) = &self.stats {
            let _ = writeln!(s, "memory.buckets={}", st.buckets);
            let _ = writeln!(s, "memory.index_bytes={}", st.index_bytes);
            let _ = writeln!(s, "memory.record_bytes={}", st.record_bytes);
            let _ = writeln!(s, "memory.total_bytes={}", st.memory_bytes());
            let _ = writeln!(s, "nodes.leaves={}", st.leaves);
            let _ = writeln!(s, "nodes.internal={}", st.internal);
            let _ = writeln!(s, "nodes.jump={}", st.jumps);
            let _ = writeln!(s, "nodes.per_key={:.4}", st.nodes_per_key());
            let _ = writeln!(s, "table.occupied_slots={}", st.occupied_slots);
            let _ = writeln!(s, "table.load_factor={:.4}", st.load_factor());
        }
        if let Some(v) = &self.verdict {
            let _ = writeln!(s, "differential={v}");
        }
        s
    }
}
