//! Workload driver for the cuckoo trie: datasets, YCSB-style workloads,
//! differential runs against a reference map and concurrency checks.

pub mod dataset;
pub mod differential;
pub mod history;
pub mod index;
pub mod report;
pub mod scan_check;
pub mod workload;
pub mod zipf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}; raise --capacity")]
    TableFull(cuckoo_trie::Error),
    #[error(transparent)]
    Index(cuckoo_trie::Error),
}

impl From<cuckoo_trie::Error> for BenchError {
    fn from(e: cuckoo_trie::Error) -> Self {
        match e {
            cuckoo_trie::Error::TableFull { .. } => BenchError::TableFull(e),
            other => BenchError::Index(other),
        }
    }
}
