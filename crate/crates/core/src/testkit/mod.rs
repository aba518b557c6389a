//! Unit tests, the bounded interpreter that runs them, and the
//! faultiness/verification predicates built on it.

mod interp;
mod unroll;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{FuncSig, LineId, Program};

pub use interp::{apply_binop, imm_value, Execution, Halt, Heap, Machine, Snapshot, HEAP_TOP};
pub use unroll::{recursive_functions, unroll_and_inline, unroll_body, UnrolledBody, UnrolledLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecBounds {
    /// Loop iterations per frame and recursion depth per function.
    pub unroll_k: usize,
    pub step_limit: usize,
}

impl Default for ExecBounds {
    fn default() -> Self {
        ExecBounds { unroll_k: 3, step_limit: 100_000 }
    }
}

/// Integer or boolean test value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
}

impl Scalar {
    pub fn value(self) -> i64 {
        match self {
            Scalar::Bool(b) => b as i64,
            Scalar::Int(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTest {
    pub name: String,
    /// `Class.func`
    pub entry: String,
    pub inputs: Vec<Scalar>,
    pub expected: Scalar,
}

#[derive(Debug, Error)]
pub enum TestError {
    #[error("tests file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("test {test}: entry {entry:?} is not of the form Class.func")]
    BadEntry { test: String, entry: String },
    #[error("test {test}: no static function {entry} with {arity} parameters")]
    UnknownEntry { test: String, entry: String, arity: usize },
}

impl UnitTest {
    pub fn new(name: &str, entry: &str, inputs: Vec<Scalar>, expected: Scalar) -> Self {
        UnitTest { name: name.into(), entry: entry.into(), inputs, expected }
    }

    pub fn entry_sig(&self) -> Result<FuncSig, TestError> {
        let (c, f) = self
            .entry
            .split_once('.')
            .ok_or_else(|| TestError::BadEntry { test: self.name.clone(), entry: self.entry.clone() })?;
        Ok(FuncSig::new(c, f, self.inputs.len()))
    }

    pub fn input_values(&self) -> Vec<i64> {
        self.inputs.iter().map(|s| s.value()).collect()
    }

    /// Checks that the entry exists and is static.
    pub fn check(&self, p: &Program) -> Result<FuncSig, TestError> {
        let sig = self.entry_sig()?;
        match p.function(&sig) {
            Some(f) if f.is_static => Ok(sig),
            _ => Err(TestError::UnknownEntry {
                test: self.name.clone(),
                entry: self.entry.clone(),
                arity: self.inputs.len(),
            }),
        }
    }
}

pub fn parse_tests(json: &str) -> Result<Vec<UnitTest>, TestError> {
    Ok(serde_json::from_str(json)?)
}

pub fn tests_to_json(tests: &[UnitTest]) -> String {
    serde_json::to_string_pretty(tests).expect("tests serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Fail(i64),
    Stuck(String),
    BoundExceeded,
}

impl Outcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, Outcome::Pass)
    }
}

/// Runs the test's entry and records the execution.
pub fn execute(p: &Program, t: &UnitTest, b: &ExecBounds, observe: Option<LineId>) -> Execution {
    let sig = match t.check(p) {
        Ok(s) => s,
        Err(e) => {
            return Execution {
                result: Err(Halt::Stuck(e.to_string())),
                lines: Default::default(),
                calls: vec![],
                steps: 0,
                snapshot: None,
                observed_value: None,
            }
        }
    };
    let mut m = Machine::new(p, *b);
    if let Some(l) = observe {
        m = m.observe(l);
    }
    m.run(&sig, &t.input_values())
}

pub fn outcome_of(t: &UnitTest, result: &Result<i64, Halt>) -> Outcome {
    match result {
        Ok(v) if *v == t.expected.value() => Outcome::Pass,
        Ok(v) => Outcome::Fail(*v),
        Err(Halt::Stuck(why)) => Outcome::Stuck(why.clone()),
        Err(Halt::Bound) => Outcome::BoundExceeded,
    }
}

pub fn run_test(p: &Program, t: &UnitTest, b: &ExecBounds) -> Outcome {
    outcome_of(t, &execute(p, t, b, None).result)
}

pub fn is_faulty(p: &Program, tests: &[UnitTest], b: &ExecBounds) -> bool {
    tests.iter().any(|t| !run_test(p, t, b).is_pass())
}

pub fn verify(p: &Program, tests: &[UnitTest], b: &ExecBounds) -> bool {
    !is_faulty(p, tests, b)
}
