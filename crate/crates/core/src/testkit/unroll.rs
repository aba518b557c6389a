//! Bounded loop unrolling.
//!
//! A body of `n` lines becomes `k + 1` copies, each followed by a trap.
//! Forward jumps stay inside their copy; a back-edge (target at or before
//! the jump) enters the next copy, and from the last copy it hits the
//! trap. Falling off the end of a copy also hits its trap. The result is
//! acyclic and index order is a topological order.

use std::collections::BTreeMap;

use crate::ir::*;

use super::ExecBounds;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrolledLine {
    /// Source line, `None` for traps.
    pub origin: Option<LineId>,
    /// Jump targets are indices into [`UnrolledBody::lines`].
    pub stmt: Statement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrolledBody {
    pub lines: Vec<UnrolledLine>,
}

impl UnrolledBody {
    /// Successor indices: fallthrough (if any) then jump target.
    pub fn fallthrough(&self, i: usize) -> Option<usize> {
        match self.lines[i].stmt {
            Statement::Return(_) | Statement::Trap => None,
            _ => Some(i + 1),
        }
    }
}

pub fn unroll_body(f: &FunctionDecl, k: usize) -> UnrolledBody {
    let n = f.body.len();
    let Some(first) = f.body.first().map(|(l, _)| l.0) else {
        return UnrolledBody { lines: vec![] };
    };
    let stride = n + 1;
    let mut lines = Vec::with_capacity((k + 1) * stride);
    for c in 0..=k {
        for (line, stmt) in &f.body {
            let stmt = match stmt {
                Statement::Jump(e, t) => {
                    let ti = (t.0 - first) as usize;
                    let idx = if t.0 > line.0 {
                        c * stride + ti
                    } else if c < k {
                        (c + 1) * stride + ti
                    } else {
                        c * stride + n
                    };
                    Statement::Jump(e.clone(), LineId(idx as u32))
                }
                s => s.clone(),
            };
            lines.push(UnrolledLine { origin: Some(*line), stmt });
        }
        lines.push(UnrolledLine { origin: None, stmt: Statement::Trap });
    }
    UnrolledBody { lines }
}

/// Functions that can reach themselves through calls.
pub fn recursive_functions(p: &Program) -> Vec<FuncSig> {
    p.signatures()
        .into_iter()
        .filter(|f| {
            p.callees(f)
                .unwrap_or_default()
                .iter()
                .any(|g| p.transitive_callees(g).map(|c| c.contains(f)).unwrap_or(false))
        })
        .collect()
}

/// Loop-free copy of `p`: every concrete function is unrolled, and
/// directly self-recursive functions are cloned per depth (`f`, `f__d2`,
/// …) with the deepest self call replaced by a trap. Mutually recursive
/// calls are left in place; the interpreter bounds them. Lines are
/// renumbered from 0; the returned map sends new lines to source lines.
pub fn unroll_and_inline(
    p: &Program,
    entry: &FuncSig,
    b: &ExecBounds,
) -> Result<(Program, BTreeMap<LineId, LineId>), QueryError> {
    p.first_line(entry)?;
    let k = b.unroll_k;
    let mut out = p.clone();
    let mut origin = BTreeMap::new();
    let mut next_line = 0u32;
    for c in out.classes.iter_mut() {
        let mut new_funcs = Vec::new();
        for f in &c.functions {
            if f.body.is_empty() || f.model.is_some() {
                new_funcs.push(f.clone());
                continue;
            }
            let self_rec = f.body.iter().any(|(_, s)| calls_self(s, &c.name, f));
            let depths = if self_rec { k } else { 1 };
            for d in 1..=depths {
                let mut g = f.clone();
                if d > 1 {
                    g.name = depth_name(&f.name, d);
                }
                let ub = unroll_body(f, k);
                let base = next_line;
                g.body = ub
                    .lines
                    .iter()
                    .enumerate()
                    .map(|(i, ul)| {
                        let l = LineId(base + i as u32);
                        if let Some(o) = ul.origin {
                            origin.insert(l, o);
                        }
                        let stmt = match &ul.stmt {
                            Statement::Jump(e, t) => Statement::Jump(e.clone(), LineId(base + t.0)),
                            s if self_rec && calls_self(s, &c.name, f) => {
                                if d == depths {
                                    Statement::Trap
                                } else {
                                    retarget_self_call(s, &depth_name(&f.name, d + 1))
                                }
                            }
                            s => s.clone(),
                        };
                        (l, stmt)
                    })
                    .collect();
                next_line += ub.lines.len() as u32;
                new_funcs.push(g);
            }
        }
        c.functions = new_funcs;
    }
    Ok((out, origin))
}

fn depth_name(name: &str, d: usize) -> String {
    format!("{name}__d{d}")
}

fn calls_self(s: &Statement, class: &str, f: &FunctionDecl) -> bool {
    match s {
        Statement::SCall { class: c, func, args, .. } => c == class && *func == f.name && args.len() == f.params.len(),
        Statement::VCall { receiver, func, args, .. } => {
            !f.is_static && receiver == "this" && *func == f.name && args.len() == f.params.len()
        }
        _ => false,
    }
}

fn retarget_self_call(s: &Statement, name: &str) -> Statement {
    match s {
        Statement::SCall { dst, class, args, .. } => {
            Statement::SCall { dst: dst.clone(), class: class.clone(), func: name.to_string(), args: args.clone() }
        }
        Statement::VCall { dst, receiver, args, .. } => Statement::VCall {
            dst: dst.clone(),
            receiver: receiver.clone(),
            func: name.to_string(),
            args: args.clone(),
        },
        s => s.clone(),
    }
}
