//! Reading the fault line's pre- and post-state back from a model.

use std::collections::{BTreeMap, BTreeSet};

use crate::encoder::{guard_var, Occurrence, TestEncoding};
use crate::ir::{LineId, Program};
use crate::smt::{SatResult, SolverError, SolverSession, Term, Value};
use crate::testkit::{Heap, Snapshot, HEAP_TOP};

/// Pointer levels followed from the variables when reading the heap.
const FOOTPRINT_DEPTH: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineStates {
    /// Variables and the part of the heap reachable in two steps from
    /// them. Reads outside it are counted as misses.
    pub pre: Snapshot,
    /// Value the line must produce for the test to pass, when every model
    /// agrees on it.
    pub post: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestStates {
    NotReached,
    /// The line runs more than once; no single state describes it.
    Repeated,
    Reached(LineStates),
}

fn ints(vals: Vec<Value>) -> Vec<i64> {
    vals.into_iter().map(Value::as_i64).collect()
}

/// States of line `l` in every test, read from the current model. The
/// session must be right after a satisfiable check; it is left without a
/// model.
pub fn extract_states(
    s: &mut SolverSession,
    p: &Program,
    encs: &[TestEncoding],
    l: LineId,
) -> Result<Vec<TestStates>, SolverError> {
    let mut out = Vec::with_capacity(encs.len());
    let mut pending = Vec::new();
    for (i, enc) in encs.iter().enumerate() {
        let (st, check) = read_states(s, p, enc, l)?;
        if let Some(c) = check {
            pending.push((i, c));
        }
        out.push(st);
    }
    // A post value is kept only if no passing completion can differ from it.
    for (i, (pi, v, model)) in pending {
        let literal = match model {
            Value::Bool(b) => Term::bool(b),
            Value::Int(n) => Term::int(n),
        };
        s.push()?;
        s.assert(&Term::not(guard_var(l)))?;
        s.assert(&pi)?;
        s.assert(&Term::ne(v, literal))?;
        let r = s.check();
        s.pop()?;
        if r? == SatResult::Unsat {
            if let TestStates::Reached(ls) = &mut out[i] {
                ls.post = Some(model.as_i64());
            }
        }
    }
    Ok(out)
}

type PostCheck = (Term, Term, Value);

fn read_states(
    s: &mut SolverSession,
    p: &Program,
    enc: &TestEncoding,
    l: LineId,
) -> Result<(TestStates, Option<PostCheck>), SolverError> {
    let occs: Vec<&Occurrence> = enc.occurrences.iter().filter(|o| o.line == l).collect();
    let pis: Vec<Term> = occs.iter().map(|o| o.pi.clone()).collect();
    let taken: Vec<&Occurrence> =
        occs.iter().zip(s.get_values(&pis)?).filter(|(_, v)| *v == Value::Bool(true)).map(|(o, _)| *o).collect();
    let occ = match taken.as_slice() {
        [] => return Ok((TestStates::NotReached, None)),
        [o] => *o,
        _ => return Ok((TestStates::Repeated, None)),
    };

    let mut terms: Vec<Term> = occ.vars.iter().map(|(_, t)| t.clone()).collect();
    terms.push(Term::select(occ.mem.clone(), Term::int(HEAP_TOP)));
    let mut vals = ints(s.get_values(&terms)?);
    let top = vals.pop().unwrap_or(1);
    let vars: BTreeMap<String, i64> = occ.vars.iter().map(|(n, _)| n.clone()).zip(vals.iter().copied()).collect();

    let max_size = p.classes.iter().map(|c| c.fields.len().max(1) as i64).max().unwrap_or(1);
    let mut cells = BTreeMap::from([(HEAP_TOP, top)]);
    let mut dtype = BTreeMap::from([(0, 0)]);
    let mut seen = BTreeSet::new();
    let mut frontier: Vec<i64> = vals.into_iter().filter(|v| *v > 0 && *v < top).collect();
    for _ in 0..FOOTPRINT_DEPTH {
        let bases: Vec<i64> = frontier.drain(..).filter(|b| seen.insert(*b)).collect();
        if bases.is_empty() {
            break;
        }
        let mut terms = Vec::new();
        for b in &bases {
            terms.push(Term::select(enc.dt.clone(), Term::int(*b)));
            for a in *b..(*b + max_size).min(top) {
                terms.push(Term::select(occ.mem.clone(), Term::int(a)));
            }
        }
        let mut it = ints(s.get_values(&terms)?).into_iter();
        for b in &bases {
            dtype.insert(*b, it.next().unwrap_or(0));
            for a in *b..(*b + max_size).min(top) {
                let v = it.next().unwrap_or(0);
                cells.insert(a, v);
                if v > 0 && v < top {
                    frontier.push(v);
                }
            }
        }
    }

    let check = match &occ.value {
        Some(v) => Some((occ.pi.clone(), v.clone(), s.get_values(std::slice::from_ref(v))?[0])),
        None => None,
    };
    let pre = Snapshot { vars, heap: Heap::partial(cells, dtype) };
    Ok((TestStates::Reached(LineStates { pre, post: None }), check))
}
