//! Shared fixtures for the criterion benches.

use std::path::{Path, PathBuf};

use netfix_core::corpus::{load_benchmark, Benchmark};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

pub fn benchmark(name: &str) -> Benchmark {
    load_benchmark(&corpus_dir().join(name)).unwrap_or_else(|e| panic!("benchmark {name}: {e}"))
}
