//! The repair loop: pick a function, localize a fault in it, try to
//! synthesize a patch there, and move on until a patch verifies or every
//! function is exhausted.

mod report;

use std::collections::BTreeSet;
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::abstraction::{apply_abstraction, ModelRegistry};
use crate::corpus::differing_lines;
use crate::ir::{statement_text, FuncSig, LineId, Program};
use crate::localizer::{localize_fault, LocalizationResult, LocalizerConfig, VisitedMap};
use crate::smt::SolverConfig;
use crate::synth::{complete_sketch, generate_grammar, make_sketch, SynthConfig};
use crate::testkit::{execute, is_faulty, run_test, ExecBounds, UnitTest};

pub use report::{IterationRecord, RepairOutcome, RepairReport, StepResult, Timings};

pub const NOT_FAULTY: &str = "not faulty, nothing to repair";
pub const IN_MODELS: &str = "tests pass with models in place; the fault is in abstracted code";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub bounds: ExecBounds,
    /// Expansion budget per synthesized expression.
    pub max_expansions: usize,
    pub no_abstraction: bool,
    pub no_summaries: bool,
    pub solver: SolverConfig,
    /// Models used unless `no_abstraction` is set.
    #[serde(skip)]
    pub models: Option<ModelRegistry>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            bounds: ExecBounds::default(),
            max_expansions: SynthConfig::default().max_expansions,
            no_abstraction: false,
            no_summaries: false,
            solver: SolverConfig::default(),
            models: None,
        }
    }
}

impl RepairConfig {
    pub fn localizer(&self) -> LocalizerConfig {
        LocalizerConfig { bounds: self.bounds, no_summaries: self.no_summaries, solver: self.solver.clone() }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig { max_expansions: self.max_expansions, bounds: self.bounds, audit_fast_path: false }
    }

    /// The program the loop works on: `p` with models attached, or `p`
    /// itself when abstraction is off.
    pub fn working_program(&self, p: &Program) -> Program {
        if self.no_abstraction {
            return p.clone();
        }
        match &self.models {
            Some(r) => apply_abstraction(p, r),
            None => apply_abstraction(p, &ModelRegistry::builtin()),
        }
    }
}

/// Where the loop stands between rounds.
#[derive(Debug, Clone, Default)]
pub struct SelectionState {
    /// Functions in order of first invocation by the failing tests.
    pub order: Vec<FuncSig>,
    /// Callee to target next, set when a round ends on a call statement.
    pub descend: Option<FuncSig>,
}

impl SelectionState {
    pub fn new(p: &Program, tests: &[UnitTest], cfg: &RepairConfig) -> Self {
        SelectionState { order: invocation_order(p, tests, &cfg.bounds, !cfg.no_abstraction), descend: None }
    }
}

/// Selectable functions in order of first invocation by the failing
/// tests. Test entries are never selected; neither are `@network` classes
/// when `library` is set, nor functions with models.
pub fn invocation_order(p: &Program, tests: &[UnitTest], b: &ExecBounds, library: bool) -> Vec<FuncSig> {
    let entries: BTreeSet<FuncSig> = tests.iter().filter_map(|t| t.check(p).ok()).collect();
    let mut order = Vec::new();
    for t in tests {
        if run_test(p, t, b).is_pass() {
            continue;
        }
        for f in execute(p, t, b, None).calls {
            if !order.contains(&f) && selectable(p, &f, &entries, library) {
                order.push(f);
            }
        }
    }
    order
}

fn selectable(p: &Program, f: &FuncSig, entries: &BTreeSet<FuncSig>, library: bool) -> bool {
    if entries.contains(f) {
        return false;
    }
    let network = p.class(&f.class).is_some_and(|c| c.is_network);
    p.function(f).is_some_and(|d| !d.is_abstracted()) && !(library && network)
}

pub fn select_function(p: &Program, v: &VisitedMap, state: &mut SelectionState) -> Option<FuncSig> {
    let open = |f: &FuncSig| !v.unvisited_in(p, f).is_empty();
    if let Some(f) = state.descend.take() {
        if open(&f) {
            return Some(f);
        }
    }
    state.order.iter().find(|f| open(f)).cloned()
}

/// How one call of [`repair_function`] ended.
#[derive(Debug, Clone)]
pub enum FunctionOutcome {
    Repaired {
        program: Program,
        line: LineId,
        patch: String,
    },
    /// The fault is a call; its callee should be targeted next.
    Descend(FuncSig),
    /// No further fault location in the function.
    Exhausted,
    Error(String),
}

/// Alternates localization and synthesis inside `f` until a patch
/// verifies, the fault turns out to be a call, or no location is left.
/// `work` is the (possibly abstracted) program that is analyzed; patches
/// are applied to and verified on `original`.
#[allow(clippy::too_many_arguments)]
pub fn repair_function(
    work: &Program,
    original: &Program,
    f: &FuncSig,
    tests: &[UnitTest],
    v: &mut VisitedMap,
    cfg: &RepairConfig,
    log: &mut Vec<IterationRecord>,
    timings: &mut Timings,
) -> FunctionOutcome {
    let lcfg = cfg.localizer();
    let scfg = cfg.synth();
    loop {
        let t0 = Instant::now();
        let loc = localize_fault(work, f, tests, v, &lcfg);
        timings.localization += t0.elapsed().as_secs_f64();
        let loc = match loc {
            Ok(l) => l,
            Err(e) => return FunctionOutcome::Error(format!("localization in {f} failed: {e}")),
        };
        let mut rec = IterationRecord::new(f, loc.result, loc.candidates);
        let line = match loc.result {
            LocalizationResult::NoFault => {
                if let Ok(ls) = work.trans_in_func(f) {
                    v.visit_all(ls);
                }
                debug!("{f}: no fault location left");
                log.push(rec);
                return FunctionOutcome::Exhausted;
            }
            LocalizationResult::FaultAt(l) => l,
        };
        v.visit(line);
        info!("{f}: fault candidate at line {line}");
        if work.is_call_stmt(line).unwrap_or(false) {
            let stmt = work.statement(line).cloned().expect("localized line exists");
            let callee = work.concrete_callees(&stmt).find(|g| !v.unvisited_in(work, g).is_empty());
            if let Some(g) = callee {
                rec.synthesis = StepResult::Descend { callee: g.to_string() };
                log.push(rec);
                return FunctionOutcome::Descend(g);
            }
        }
        let sketch = match make_sketch(work, f, line) {
            Ok(s) => s.with_reference(original),
            Err(e) => {
                rec.synthesis = StepResult::NoSketch { reason: e.to_string() };
                log.push(rec);
                continue;
            }
        };
        let g = generate_grammar(&sketch);
        let t1 = Instant::now();
        let r = complete_sketch(&sketch, &g, tests, &scfg, Some(&loc.states));
        timings.synthesis += t1.elapsed().as_secs_f64();
        rec.sketch = Some(sketch.text());
        rec.grammar_size = g.len();
        rec.candidates_tried = r.stats.candidates;
        match (r.program, r.patch) {
            (Some(program), Some(stmt)) => {
                let patch = statement_text(&stmt, &original.strings);
                rec.synthesis = StepResult::Patched { patch: patch.clone() };
                log.push(rec);
                return FunctionOutcome::Repaired { program, line, patch };
            }
            _ => {
                rec.synthesis = StepResult::NoPatch;
                log.push(rec);
            }
        }
    }
}

fn failed(reason: impl Into<String>, log: Vec<IterationRecord>, mut timings: Timings, t0: Instant) -> RepairReport {
    timings.total = t0.elapsed().as_secs_f64();
    RepairReport { outcome: RepairOutcome::Failed { reason: reason.into() }, iterations: log, timings, program: None }
}

/// Repairs `p` against `tests`. Every failure is reported in the outcome.
pub fn repair(p: &Program, tests: &[UnitTest], cfg: &RepairConfig) -> RepairReport {
    let t0 = Instant::now();
    let mut log = Vec::new();
    let mut timings = Timings::default();
    if tests.is_empty() {
        return failed("no tests given", log, timings, t0);
    }
    if let Some(t) = tests.iter().find(|t| t.check(p).is_err()) {
        let err = t.check(p).unwrap_err();
        return failed(format!("test {}: {err}", t.name), log, timings, t0);
    }
    if !is_faulty(p, tests, &cfg.bounds) {
        return failed(NOT_FAULTY, log, timings, t0);
    }
    let work = cfg.working_program(p);
    if !is_faulty(&work, tests, &cfg.bounds) {
        return failed(IN_MODELS, log, timings, t0);
    }
    let mut v = VisitedMap::new(&work);
    let mut state = SelectionState::new(&work, tests, cfg);
    while let Some(f) = select_function(&work, &v, &mut state) {
        match repair_function(&work, p, &f, tests, &mut v, cfg, &mut log, &mut timings) {
            FunctionOutcome::Repaired { program, line, patch } => {
                assert!(!is_faulty(&program, tests, &cfg.bounds), "accepted patch must verify");
                debug_assert_eq!(differing_lines(p, &program), vec![line]);
                timings.total = t0.elapsed().as_secs_f64();
                let text = program.to_string();
                return RepairReport {
                    outcome: RepairOutcome::Repaired { line, patch, program: text },
                    iterations: log,
                    timings,
                    program: Some(program),
                };
            }
            FunctionOutcome::Descend(g) => state.descend = Some(g),
            FunctionOutcome::Exhausted => {}
            FunctionOutcome::Error(reason) => return failed(reason, log, timings, t0),
        }
    }
    failed("no function left to repair", log, timings, t0)
}

/// The first fault location the repair loop would try, together with the
/// function it was found in. Functions that yield no location are
/// exonerated as in [`repair`].
pub fn first_fault(p: &Program, tests: &[UnitTest], cfg: &RepairConfig) -> Result<Option<(FuncSig, LineId)>, String> {
    let work = cfg.working_program(p);
    let mut v = VisitedMap::new(&work);
    let mut state = SelectionState::new(&work, tests, cfg);
    let lcfg = cfg.localizer();
    while let Some(f) = select_function(&work, &v, &mut state) {
        let loc = localize_fault(&work, &f, tests, &v, &lcfg).map_err(|e| e.to_string())?;
        match loc.result {
            LocalizationResult::FaultAt(l) => return Ok(Some((f, l))),
            LocalizationResult::NoFault => v.visit_all(work.trans_in_func(&f).unwrap_or_default()),
        }
    }
    Ok(None)
}
