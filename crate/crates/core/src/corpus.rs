//! Benchmark directories: `<name>/{program.np, tests.json, expected_patch.np}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{repair, RepairConfig, RepairOutcome, Timings};
use crate::ir::{parse_program, LineId, ParseError, Program};
use crate::testkit::{parse_tests, TestError, UnitTest};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{path}: {err}")]
    Parse { path: PathBuf, err: ParseError },
    #[error("{path}: {err}")]
    Tests { path: PathBuf, err: TestError },
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub dir: PathBuf,
    pub program: Program,
    pub tests: Vec<UnitTest>,
    pub expected_patch: Option<Program>,
}

impl Benchmark {
    /// The line where `program` and `expected_patch` differ, when they
    /// differ at exactly one line.
    pub fn fault_line(&self) -> Option<LineId> {
        let fixed = self.expected_patch.as_ref()?;
        let diff = differing_lines(&self.program, fixed);
        match diff.as_slice() {
            [l] => Some(*l),
            _ => None,
        }
    }
}

/// Lines whose statements differ between two programs with the same line
/// layout. Lines present in only one of them count as differing.
pub fn differing_lines(a: &Program, b: &Program) -> Vec<LineId> {
    let (ia, ib) = (a.line_index(), b.line_index());
    let mut out: Vec<LineId> =
        ia.keys().chain(ib.keys()).filter(|l| a.statement(**l) != b.statement(**l)).copied().collect();
    out.sort();
    out.dedup();
    out
}

pub fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|err| CorpusError::Io { path: path.to_path_buf(), err })
}

pub fn load_program(path: &Path) -> Result<Program, CorpusError> {
    parse_program(&read_file(path)?).map_err(|err| CorpusError::Parse { path: path.to_path_buf(), err })
}

pub fn load_tests(path: &Path) -> Result<Vec<UnitTest>, CorpusError> {
    parse_tests(&read_file(path)?).map_err(|err| CorpusError::Tests { path: path.to_path_buf(), err })
}

pub fn load_benchmark(dir: &Path) -> Result<Benchmark, CorpusError> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let program = load_program(&dir.join("program.np"))?;
    let tests = load_tests(&dir.join("tests.json"))?;
    let patch = dir.join("expected_patch.np");
    let expected_patch = if patch.exists() { Some(load_program(&patch)?) } else { None };
    Ok(Benchmark { name, dir: dir.to_path_buf(), program, tests, expected_patch })
}

/// Every subdirectory of `root` holding a `program.np`, sorted by name.
pub fn load_corpus(root: &Path) -> Result<Vec<Benchmark>, CorpusError> {
    let entries = fs::read_dir(root).map_err(|err| CorpusError::Io { path: root.to_path_buf(), err })?;
    let mut dirs: Vec<PathBuf> =
        entries.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.join("program.np").is_file()).collect();
    dirs.sort();
    dirs.iter().map(|d| load_benchmark(d)).collect()
}

/// One row of a corpus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub name: String,
    pub lines: usize,
    pub tests: usize,
    /// Line where the expected patch differs from the program.
    pub expected_line: Option<LineId>,
    pub repaired: bool,
    pub line: Option<LineId>,
    pub patch: Option<String>,
    /// The repaired program equals the expected patch.
    pub exact: Option<bool>,
    pub outcome: RepairOutcome,
    pub iterations: usize,
    pub timings: Timings,
}

pub fn run_benchmark(b: &Benchmark, cfg: &RepairConfig) -> BenchRecord {
    let report = repair(&b.program, &b.tests, cfg);
    let exact = match (&b.expected_patch, &report.program) {
        (Some(want), Some(got)) => Some(differing_lines(want, got).is_empty()),
        (Some(_), None) => Some(false),
        (None, _) => None,
    };
    BenchRecord {
        name: b.name.clone(),
        lines: b.program.all_lines().len(),
        tests: b.tests.len(),
        expected_line: b.fault_line(),
        repaired: report.is_repaired(),
        line: report.fault_line(),
        patch: report.patch().map(str::to_string),
        exact,
        outcome: report.outcome.clone(),
        iterations: report.iterations.len(),
        timings: report.timings,
    }
}
