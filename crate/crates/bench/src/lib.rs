//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use sentibucket_core::corpus::{load_corpus, CorpusFormat};
use sentibucket_core::AnnotatedCorpus;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn demo_corpus() -> AnnotatedCorpus {
    load_corpus(&fixture("demo.tsv"), CorpusFormat::Tsv).expect("demo corpus")
}
