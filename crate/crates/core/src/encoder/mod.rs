//! Symbolic encoding of unrolled programs.
//!
//! Functions on the call path to the repair target are inlined so that
//! their lines can carry correctness guards `b<line>`; every other callee
//! is represented by a memoized summary, a formula over the placeholders
//! `%arg<i>`, `%ret`, `%min`, `%mout` and `%dt` that is instantiated by
//! substitution at each call site.

mod trace;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::ir::{FuncSig, LineId, Program, Statement};
use crate::smt::{Sort, Term};
use crate::testkit::{recursive_functions, unroll_body, ExecBounds, TestError, UnitTest, UnrolledBody, HEAP_TOP};

pub use trace::{binop_term, guard_var, occurrences_by_line, Address, Callee, Exit, Occurrence, State, TraceBuilder};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Test(#[from] TestError),
    #[error("unknown function {0}")]
    UnknownFunction(FuncSig),
    #[error("no summary for {0}: {1}")]
    Summary(FuncSig, String),
}

/// Allocates a zeroed `class` object at the current heap top of `m`.
/// Returns the object address, the updated memory, and the dynamic-type
/// fact for the new object.
pub fn alloc(p: &Program, class: &str, m: &Term, dt: &Term) -> Option<(Term, Term, Term)> {
    let a = Term::select(m.clone(), Term::int(HEAP_TOP));
    let (m1, fact) = alloc_at(p, class, m, &a, dt)?;
    Some((a, m1, fact))
}

/// As [`alloc`], with the heap-top value `a` already read from `m`.
pub fn alloc_at(p: &Program, class: &str, m: &Term, a: &Term, dt: &Term) -> Option<(Term, Term)> {
    let id = p.class_id(class)?;
    let size = p.object_size(class)?;
    let mut m1 = Term::store(m.clone(), Term::int(HEAP_TOP), Term::add(a.clone(), Term::int(size)));
    for i in 0..size {
        m1 = Term::store(m1, Term::add(a.clone(), Term::int(i)), Term::int(0));
    }
    let fact = Term::eq(Term::select(dt.clone(), a.clone()), Term::int(id));
    Some((m1, fact))
}

/// Memory every test starts from: all zero, heap top at 1.
pub fn initial_memory() -> Term {
    Term::store(Term::const_mem(0), Term::int(HEAP_TOP), Term::int(1))
}

/// Which functions are inlined and which lines are relaxable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Region {
    pub inline: BTreeSet<FuncSig>,
    pub candidates: BTreeSet<LineId>,
}

impl Region {
    /// Relaxable lines: unvisited lines of `target`, except allocations.
    pub fn for_target(p: &Program, target: &FuncSig, visited: &BTreeSet<LineId>) -> Region {
        let candidates = p
            .function(target)
            .filter(|f| !f.is_abstracted())
            .map(|f| {
                f.body
                    .iter()
                    .filter(|(l, s)| !visited.contains(l) && !matches!(s, Statement::New(..) | Statement::Trap))
                    .map(|(l, _)| *l)
                    .collect()
            })
            .unwrap_or_default();
        Region { inline: p.callers_closure(target), candidates }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummarySource {
    Computed,
    Model,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub sig: FuncSig,
    /// Argument count including the receiver of instance functions.
    pub n_args: usize,
    pub formula: Term,
    pub source: SummarySource,
}

pub fn placeholder_arg(i: usize) -> Term {
    Term::var(format!("%arg{i}"), Sort::Int)
}

impl Summary {
    pub fn placeholders(n_args: usize) -> (Vec<Term>, Term, Term, Term, Term) {
        (
            (0..n_args).map(placeholder_arg).collect(),
            Term::var("%ret", Sort::Int),
            Term::var("%min", Sort::Mem),
            Term::var("%mout", Sort::Mem),
            Term::var("%dt", Sort::Mem),
        )
    }

    /// Substitutes actuals for the placeholders and prefixes every other
    /// variable with `prefix`.
    pub fn instantiate(&self, prefix: &str, args: &[Term], m_in: &Term, dt: &Term, ret: &Term, m_out: &Term) -> Term {
        self.formula.subst(&mut |name, sort| {
            Some(match name {
                "%ret" => ret.clone(),
                "%min" => m_in.clone(),
                "%mout" => m_out.clone(),
                "%dt" => dt.clone(),
                n => match n.strip_prefix("%arg").and_then(|i| i.parse::<usize>().ok()) {
                    Some(i) => args.get(i).cloned().unwrap_or_else(|| Term::int(0)),
                    None => Term::var(format!("{prefix}{n}"), sort),
                },
            })
        })
    }
}

/// Encoding of one test: constraints plus the handles needed to read a
/// model back.
#[derive(Debug, Clone)]
pub struct TestEncoding {
    pub constraints: Vec<Term>,
    pub exits: Vec<Exit>,
    /// `(source line, selector)` for every encoded line outside
    /// summaries.
    pub trace: Vec<(LineId, Term)>,
    pub occurrences: Vec<Occurrence>,
    pub dt: Term,
}

pub struct Encoder<'p> {
    pub p: &'p Program,
    pub bounds: ExecBounds,
    /// Inline every call instead of using summaries.
    pub no_summaries: bool,
    recursive: BTreeSet<FuncSig>,
    bodies: Mutex<HashMap<FuncSig, Arc<UnrolledBody>>>,
    summaries: Mutex<HashMap<FuncSig, Arc<Summary>>>,
}

impl<'p> Encoder<'p> {
    pub fn new(p: &'p Program, bounds: ExecBounds, no_summaries: bool) -> Self {
        Encoder {
            p,
            bounds,
            no_summaries,
            recursive: recursive_functions(p).into_iter().collect(),
            bodies: Mutex::new(HashMap::new()),
            summaries: Mutex::new(HashMap::new()),
        }
    }

    pub(crate) fn body(&self, sig: &FuncSig) -> Arc<UnrolledBody> {
        if let Some(b) = self.bodies.lock().unwrap().get(sig) {
            return b.clone();
        }
        let f = self.p.function(sig).expect("function exists");
        let b = Arc::new(unroll_body(f, self.bounds.unroll_k));
        self.bodies.lock().unwrap().entry(sig.clone()).or_insert(b).clone()
    }

    pub(crate) fn should_inline(&self, region: &Region, sig: &FuncSig) -> bool {
        self.no_summaries || region.inline.contains(sig) || self.recursive.contains(sig)
    }

    /// Number of summaries computed so far.
    pub fn summary_count(&self) -> usize {
        self.summaries.lock().unwrap().len()
    }

    /// Summary of `sig`: the model template for abstracted functions,
    /// otherwise the trace encoding of its body with all internal names
    /// local to the template.
    pub fn summary(&self, sig: &FuncSig) -> Result<Arc<Summary>, EncodeError> {
        if let Some(s) = self.summaries.lock().unwrap().get(sig) {
            return Ok(s.clone());
        }
        let f = self.p.function(sig).ok_or_else(|| EncodeError::UnknownFunction(sig.clone()))?;
        let n_args = f.params.len() + usize::from(!f.is_static);
        let (args, ret, m_in, m_out, dt) = Summary::placeholders(n_args);
        let (formula, source) = match &f.model {
            Some(model) => {
                let eff = model
                    .encode(self.p, &sig.class, &args, &m_in, &dt)
                    .map_err(|e| EncodeError::Summary(sig.clone(), e.to_string()))?;
                let mut parts = eff.requires;
                parts.push(Term::eq(ret, eff.ret));
                parts.push(Term::eq(m_out, eff.m_out));
                (Term::and(parts), SummarySource::Model)
            }
            None => {
                let region = Region::default();
                let mut b = TraceBuilder::new(self, &region, "s.", dt, false);
                b.push_frame(sig.clone());
                let exits = b.encode_body(sig, args, m_in, Term::bool(true));
                let mut parts = std::mem::take(&mut b.constraints);
                for x in exits {
                    parts.push(Term::implies(
                        x.pi,
                        Term::and2(Term::eq(ret.clone(), x.ret), Term::eq(m_out.clone(), x.mem)),
                    ));
                }
                (Term::and(parts), SummarySource::Computed)
            }
        };
        let s = Arc::new(Summary { sig: sig.clone(), n_args, formula, source });
        Ok(self.summaries.lock().unwrap().entry(sig.clone()).or_insert(s).clone())
    }

    /// Trace encoding of `entry` run on `args`, with callees inlined or
    /// summarized according to `region`. Names are prefixed with `prefix`.
    pub fn encode_region(
        &self,
        region: &Region,
        entry: &FuncSig,
        args: &[i64],
        prefix: &str,
    ) -> Result<TestEncoding, EncodeError> {
        if self.p.function(entry).is_none() {
            return Err(EncodeError::UnknownFunction(entry.clone()));
        }
        let dt = Term::var(format!("{prefix}dt"), Sort::Mem);
        let mut b = TraceBuilder::new(self, region, prefix, dt.clone(), true);
        b.constraints.push(Term::eq(Term::select(dt.clone(), Term::int(0)), Term::int(0)));
        b.push_frame(entry.clone());
        let exits =
            b.encode_body(entry, args.iter().map(|v| Term::int(*v)).collect(), initial_memory(), Term::bool(true));
        Ok(TestEncoding { constraints: b.constraints, exits, trace: b.trace, occurrences: b.occurrences, dt })
    }

    /// Region encoding of the test's entry conjoined with its
    /// input/output example.
    pub fn encode_test(&self, region: &Region, t: &UnitTest, idx: usize) -> Result<TestEncoding, EncodeError> {
        let entry = t.check(self.p)?;
        let mut enc = self.encode_region(region, &entry, &t.input_values(), &format!("t{idx}."))?;
        enc.constraints.push(example_consistency(&enc.exits, t.expected.value()));
        Ok(enc)
    }
}

/// Every return the trace reaches yields `expected`.
pub fn example_consistency(exits: &[Exit], expected: i64) -> Term {
    Term::and(exits.iter().map(|x| Term::implies(x.pi.clone(), Term::eq(x.ret.clone(), Term::int(expected)))))
}

/// Standalone summary computation.
pub fn compute_summary(p: &Program, f: &FuncSig, b: &ExecBounds) -> Result<Summary, EncodeError> {
    Encoder::new(p, *b, false).summary(f).map(|s| (*s).clone())
}
