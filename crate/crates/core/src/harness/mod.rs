//! Corpus replay, synthetic corpus generation and retrieval benchmarking.

pub mod bench;
pub mod corpus;
pub mod gen;
pub mod replay;

pub use bench::{bench, BenchReport, Policy};
pub use corpus::{read_corpus, write_corpus, CorpusRecord, Probe};
pub use gen::{gen_corpus, GenSpec};
pub use replay::{replay, ReplayReport, ReportFile};
