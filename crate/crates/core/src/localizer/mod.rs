//! Fault localization by guard relaxation.
//!
//! Each candidate line `L` of the target function gets a guard `b<L>`;
//! with `b<L>` false the line's effect is unconstrained. All tests are
//! conjoined over shared guards, exactly one guard is allowed to be false,
//! and a model names the fault line.

mod states;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{guard_var, EncodeError, Encoder, Region, TestEncoding};
use crate::ir::{FuncSig, LineId, Program};
use crate::smt::{SatResult, SolverConfig, SolverError, SolverSession, Term, Value};
use crate::testkit::{ExecBounds, UnitTest};

pub use states::{extract_states, LineStates, TestStates};

#[derive(Debug, Error)]
pub enum LocalizeError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("no tests given")]
    NoTests,
    #[error("unknown line {0}")]
    UnknownLine(LineId),
}

/// Lines already tried or exonerated. Entries only ever flip to true.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VisitedMap {
    map: BTreeMap<LineId, bool>,
}

impl VisitedMap {
    pub fn new(p: &Program) -> Self {
        VisitedMap { map: p.all_lines().into_iter().map(|l| (l, false)).collect() }
    }

    pub fn is_visited(&self, l: LineId) -> bool {
        self.map.get(&l).copied().unwrap_or(false)
    }

    /// Returns whether `l` was unvisited before.
    pub fn visit(&mut self, l: LineId) -> bool {
        !std::mem::replace(self.map.entry(l).or_insert(false), true)
    }

    pub fn visit_all(&mut self, ls: impl IntoIterator<Item = LineId>) {
        for l in ls {
            self.visit(l);
        }
    }

    pub fn visited(&self) -> BTreeSet<LineId> {
        self.map.iter().filter(|(_, v)| **v).map(|(l, _)| *l).collect()
    }

    pub fn count(&self) -> usize {
        self.map.values().filter(|v| **v).count()
    }

    pub fn unvisited_in(&self, p: &Program, f: &FuncSig) -> Vec<LineId> {
        p.function(f).map(|f| f.lines().filter(|l| !self.is_visited(*l)).collect()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalizationResult {
    FaultAt(LineId),
    NoFault,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizerConfig {
    pub bounds: ExecBounds,
    /// Inline every callee instead of using summaries.
    pub no_summaries: bool,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub result: LocalizationResult,
    /// Per test, in test order; empty for `NoFault`.
    pub states: Vec<TestStates>,
    pub candidates: usize,
    pub queries: usize,
}

/// `sum ite(b, 0, 1) = k` over the guards of `lines`.
pub fn cardinality(lines: &BTreeSet<LineId>, k: i64) -> Term {
    let sum =
        lines.iter().fold(Term::int(0), |acc, l| Term::add(acc, Term::ite(guard_var(*l), Term::int(0), Term::int(1))));
    Term::eq(sum, Term::int(k))
}

fn encode_all(enc: &Encoder, region: &Region, tests: &[UnitTest]) -> Result<Vec<TestEncoding>, EncodeError> {
    tests.iter().enumerate().map(|(i, t)| enc.encode_test(region, t, i)).collect()
}

fn assert_encodings(s: &mut SolverSession, encs: &[TestEncoding]) -> Result<(), SolverError> {
    for e in encs {
        s.assert_all(&e.constraints)?;
    }
    Ok(())
}

/// Finds one unvisited line of `f` whose relaxation makes every test
/// pass.
pub fn localize_fault(
    p: &Program,
    f: &FuncSig,
    tests: &[UnitTest],
    v: &VisitedMap,
    cfg: &LocalizerConfig,
) -> Result<Localization, LocalizeError> {
    if tests.is_empty() {
        return Err(LocalizeError::NoTests);
    }
    let region = Region::for_target(p, f, &v.visited());
    let candidates = region.candidates.len();
    let no_fault = |queries| Localization { result: LocalizationResult::NoFault, states: vec![], candidates, queries };
    if region.candidates.is_empty() {
        return Ok(no_fault(0));
    }
    let enc = Encoder::new(p, cfg.bounds, cfg.no_summaries);
    let encs = encode_all(&enc, &region, tests)?;
    let mut s = SolverSession::start(&cfg.solver)?;
    assert_encodings(&mut s, &encs)?;
    s.assert(&cardinality(&region.candidates, 1))?;
    if s.check()? == SatResult::Unsat {
        return Ok(no_fault(s.queries));
    }
    let lines: Vec<LineId> = region.candidates.iter().copied().collect();
    let guards: Vec<Term> = lines.iter().map(|l| guard_var(*l)).collect();
    let vals = s.get_values(&guards)?;
    let line = lines
        .iter()
        .zip(&vals)
        .find(|(_, v)| **v == Value::Bool(false))
        .map(|(l, _)| *l)
        .ok_or_else(|| SolverError::Protocol("model relaxes no guard".into()))?;
    let states = extract_states(&mut s, p, &encs, line)?;
    Ok(Localization { result: LocalizationResult::FaultAt(line), states, candidates, queries: s.queries })
}

/// Whether one test's encoding, with no line relaxed, is satisfiable.
pub fn check_test_symbolic(p: &Program, t: &UnitTest, cfg: &LocalizerConfig) -> Result<bool, LocalizeError> {
    let enc = Encoder::new(p, cfg.bounds, cfg.no_summaries);
    let e = enc.encode_test(&Region::default(), t, 0)?;
    let mut s = SolverSession::start(&cfg.solver)?;
    s.assert_all(&e.constraints)?;
    Ok(s.check()? == SatResult::Sat)
}

/// True iff the conjunction of all tests with no line relaxed is
/// unsatisfiable.
pub fn check_faulty_symbolic(p: &Program, tests: &[UnitTest], cfg: &LocalizerConfig) -> Result<bool, LocalizeError> {
    if tests.is_empty() {
        return Err(LocalizeError::NoTests);
    }
    let enc = Encoder::new(p, cfg.bounds, cfg.no_summaries);
    let encs = encode_all(&enc, &Region::default(), tests)?;
    let mut s = SolverSession::start(&cfg.solver)?;
    assert_encodings(&mut s, &encs)?;
    Ok(s.check()? == SatResult::Unsat)
}

/// Satisfiability of all tests with exactly `line` relaxed.
pub fn relaxed_sat(
    p: &Program,
    tests: &[UnitTest],
    line: LineId,
    cfg: &LocalizerConfig,
) -> Result<bool, LocalizeError> {
    let f = p.function_of_line(line).ok_or(LocalizeError::UnknownLine(line))?;
    let region = Region { inline: p.callers_closure(&f), candidates: BTreeSet::from([line]) };
    let enc = Encoder::new(p, cfg.bounds, cfg.no_summaries);
    let encs = encode_all(&enc, &region, tests)?;
    let mut s = SolverSession::start(&cfg.solver)?;
    assert_encodings(&mut s, &encs)?;
    s.assert(&Term::not(guard_var(line)))?;
    Ok(s.check()? == SatResult::Sat)
}

/// Lines selected by a model of the fully inlined encoding of `t`'s
/// entry on its inputs (the expected output is not asserted), or `None`
/// when no bounded execution exists.
pub fn trace_lines(
    p: &Program,
    t: &UnitTest,
    cfg: &LocalizerConfig,
) -> Result<Option<BTreeSet<LineId>>, LocalizeError> {
    let enc = Encoder::new(p, cfg.bounds, true);
    let entry = t.check(p).map_err(EncodeError::from)?;
    let e = enc.encode_region(&Region::default(), &entry, &t.input_values(), "t0.")?;
    let mut s = SolverSession::start(&cfg.solver)?;
    s.assert_all(&e.constraints)?;
    if s.check()? == SatResult::Unsat {
        return Ok(None);
    }
    let pis: Vec<Term> = e.trace.iter().map(|(_, pi)| pi.clone()).collect();
    let vals = s.get_values(&pis)?;
    Ok(Some(e.trace.iter().zip(vals).filter(|(_, v)| *v == Value::Bool(true)).map(|((l, _), _)| *l).collect()))
}

/// Whether every model of the fully inlined encoding of `t`'s entry on
/// its inputs selects exactly the lines in `executed`.
pub fn trace_forced(
    p: &Program,
    t: &UnitTest,
    executed: &BTreeSet<LineId>,
    cfg: &LocalizerConfig,
) -> Result<bool, LocalizeError> {
    let enc = Encoder::new(p, cfg.bounds, true);
    let entry = t.check(p).map_err(EncodeError::from)?;
    let e = enc.encode_region(&Region::default(), &entry, &t.input_values(), "t0.")?;
    let mut by_line: BTreeMap<LineId, Vec<Term>> = BTreeMap::new();
    for (l, pi) in &e.trace {
        by_line.entry(*l).or_default().push(pi.clone());
    }
    if executed.iter().any(|l| !by_line.contains_key(l)) {
        return Ok(false);
    }
    let mismatch = Term::or(by_line.into_iter().map(|(l, pis)| {
        let selected = Term::or(pis);
        if executed.contains(&l) {
            Term::not(selected)
        } else {
            selected
        }
    }));
    let mut s = SolverSession::start(&cfg.solver)?;
    s.assert_all(&e.constraints)?;
    if s.check()? == SatResult::Unsat {
        return Ok(false);
    }
    s.assert(&mismatch)?;
    Ok(s.check()? == SatResult::Unsat)
}
