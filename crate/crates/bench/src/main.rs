use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use cuckoo_trie::{Config, CuckooTrie};

use ct_bench::dataset::{self, DatasetSource, Format};
use ct_bench::differential::{differential, DiffConfig};
use ct_bench::index::Reference;
use ct_bench::report::RunReport;
use ct_bench::workload::{run, run_differential, Distribution, Workload, WorkloadSpec};
use ct_bench::BenchError;

const EXIT_DIVERGED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum IndexChoice {
    CuckooTrie,
    Reference,
}

/// Runs YCSB-style workloads against the cuckoo trie.
#[derive(Parser, Debug)]
#[command(name = "ct-bench", version)]
struct Cli {
    /// load, a, b, c, d, e or f.
    #[arg(long, default_value = "c")]
    workload: Workload,
    /// rand-8, rand-16 or file:PATH.
    #[arg(long, default_value = "rand-8")]
    dataset: DatasetSource,
    /// Number of keys.
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    /// Operations in the measured phase. Defaults to the number of keys.
    #[arg(long)]
    ops: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Bucket count. Defaults to a size that keeps the load factor near 80%.
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long, value_enum, default_value = "cuckoo-trie")]
    index: IndexChoice,
    /// Run the workload single-threaded against the trie and a reference
    /// map in lockstep and compare every result.
    #[arg(long)]
    differential: bool,
    /// Compare the trie against a reference map on this many random
    /// operations over a small key space instead of running a workload.
    #[arg(long, value_name = "OPS")]
    random_ops: Option<usize>,
    /// Key space for --random-ops.
    #[arg(long, default_value_t = 4096)]
    key_space: usize,
    /// Zipfian instead of uniform key choice.
    #[arg(long)]
    zipfian: bool,
    /// Key file layout for file datasets: lines or fixed:WIDTH.
    #[arg(long, default_value = "lines")]
    format: Format,
    /// Trie levels fetched ahead during a search.
    #[arg(long)]
    prefetch_depth: Option<usize>,
    /// Write the dataset to this file and exit.
    #[arg(long, value_name = "PATH")]
    export: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ct-bench: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, BenchError> {
    let prefetch_depth = cli
        .prefetch_depth
        .unwrap_or(cuckoo_trie::trie::DEFAULT_PREFETCH_DEPTH);
    if cli.threads == 0 {
        return Err(BenchError::Config("--threads must be at least 1".into()));
    }

    if let Some(ops) = cli.random_ops {
        let mut cfg = DiffConfig::new(ops, cli.key_space, cli.seed);
        cfg.prefetch_depth = prefetch_depth;
        cfg.buckets = cli
            .capacity
            .unwrap_or_else(|| CuckooTrie::buckets_for_keys(cli.key_space, 0.8));
        cuckoo_trie::hash::HashParams::new(cfg.buckets, cfg.seed)?;
        let verdict = differential(&cfg);
        println!("differential: {verdict}");
        return Ok(if verdict.passed() { 0 } else { EXIT_DIVERGED });
    }

    let data = dataset::generate(&cli.dataset, cli.n, cli.seed, cli.format)?;
    if let Some(path) = &cli.export {
        dataset::export(&data, path, cli.format)?;
        println!("wrote {} keys to {}", data.len(), path.display());
        return Ok(0);
    }
    let buckets = cli
        .capacity
        .unwrap_or_else(|| CuckooTrie::buckets_for_keys(data.len(), 0.80));
    let trie = CuckooTrie::with_config(Config::new(buckets, cli.seed).prefetch_depth(prefetch_depth))?;
    let spec = WorkloadSpec {
        workload: cli.workload,
        op_count: cli.ops.unwrap_or(data.len()),
        threads: if cli.differential { 1 } else { cli.threads },
        distribution: if cli.zipfian {
            Distribution::Zipfian
        } else {
            Distribution::Uniform
        },
        seed: cli.seed,
    };
    if cli.differential && cli.threads != 1 {
        eprintln!("ct-bench: differential runs are single-threaded; ignoring --threads");
    }

    let mut report = RunReport {
        workload: cli.workload.name().to_string(),
        dataset: data.name.clone(),
        keys: data.len(),
        threads: spec.threads,
        seed: cli.seed,
        phases: Vec::new(),
        stats: None,
        verdict: None,
    };
    let mut code = 0;
    if cli.differential {
        let reference = Reference::new();
        let divergence = run_differential(&trie, &reference, &data.keys, &spec)?;
        report.verdict = Some(match divergence {
            None => "pass".to_string(),
            Some(d) => {
                code = EXIT_DIVERGED;
                format!(
                    "divergence at op {} (seed {}): {:?} expected {:?}, got {:?}",
                    d.op_index, cli.seed, d.op, d.expected, d.actual
                )
            }
        });
        report.stats = Some(trie.stats());
    } else {
        match cli.index {
            IndexChoice::CuckooTrie => {
                report.phases = run(&trie, &data.keys, &spec)?;
                report.stats = Some(trie.stats());
            }
            IndexChoice::Reference => {
                report.phases = run(&Reference::new(), &data.keys, &spec)?;
            }
        }
    }
    print!("{}", report.human());
    print!("{}", report.key_values());
    Ok(code)
}
