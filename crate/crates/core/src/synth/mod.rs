//! Patch synthesis: a hole at the fault line, a typed grammar over what is
//! in scope there, and a bounded depth-first search over that grammar.

mod grammar;
mod space;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::types::{expr_type, field_type, infer_var_types};
use crate::ir::*;
use crate::localizer::TestStates;
use crate::testkit::{verify, ExecBounds, Halt, Machine, UnitTest};

pub use grammar::{enumerate_all, CallShape, Grammar, NtId, Production, Rhs};
pub use space::generate_grammar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HoleKind {
    AssignRhs,
    JumpCond,
    ReturnValue,
    CallExpr,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SketchError {
    #[error("line {0} is an allocation; it admits no hole")]
    NoHoleForNew(LineId),
    #[error("line {line} is not in {func}")]
    NotInFunction { line: LineId, func: FuncSig },
    #[error("line {0} admits no hole")]
    NoHole(LineId),
}

/// A program with one hole at `line`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sketch {
    pub program: Program,
    pub func: FuncSig,
    pub line: LineId,
    pub kind: HoleKind,
    pub original: Statement,
    /// Static type expected of the fill.
    pub hole_type: Type,
    /// Program that completions are built from and verified against.
    /// Differs from `program` when the latter has abstracted bodies.
    pub reference: Program,
}

pub fn make_sketch(p: &Program, f: &FuncSig, l: LineId) -> Result<Sketch, SketchError> {
    let decl = p.function(f).ok_or_else(|| SketchError::NotInFunction { line: l, func: f.clone() })?;
    let stmt = decl
        .body
        .iter()
        .find(|(x, _)| *x == l)
        .map(|(_, s)| s.clone())
        .ok_or_else(|| SketchError::NotInFunction { line: l, func: f.clone() })?;
    let env = infer_var_types(p, &f.class, decl);
    let var_ty = |x: &str| env.get(x).cloned();
    let (kind, hole_type) = match &stmt {
        Statement::New(..) => return Err(SketchError::NoHoleForNew(l)),
        Statement::Trap => return Err(SketchError::NoHole(l)),
        Statement::Jump(..) => (HoleKind::JumpCond, Type::Bool),
        Statement::Return(_) => (HoleKind::ReturnValue, decl.ret_ty.clone().unwrap_or(Type::Int)),
        Statement::Assign(lv, e) => {
            let ty = match lv {
                LValue::Var(x) => var_ty(x),
                LValue::Field(b, a) => match var_ty(b) {
                    Some(Type::Class(c)) => field_type(p, &c, a),
                    _ => None,
                },
                LValue::Index(..) => Some(Type::Int),
            };
            (HoleKind::AssignRhs, ty.or_else(|| expr_type(p, &env, e)).unwrap_or(Type::Int))
        }
        Statement::SCall { dst, .. } | Statement::VCall { dst, .. } => {
            (HoleKind::CallExpr, var_ty(dst).unwrap_or(Type::Int))
        }
    };
    Ok(Sketch { program: p.clone(), func: f.clone(), line: l, kind, original: stmt, hole_type, reference: p.clone() })
}

impl Sketch {
    /// The statement obtained by putting `e` in the hole, if `e` has the
    /// shape the hole requires.
    pub fn fill(&self, e: &Expr) -> Option<Statement> {
        match (&self.original, self.kind) {
            (Statement::Assign(lv, _), HoleKind::AssignRhs) => Some(Statement::Assign(lv.clone(), e.clone())),
            (Statement::Jump(_, t), HoleKind::JumpCond) => Some(Statement::Jump(e.clone(), *t)),
            (Statement::Return(_), HoleKind::ReturnValue) => e.as_immediate().map(Statement::Return),
            (Statement::SCall { dst, .. } | Statement::VCall { dst, .. }, HoleKind::CallExpr) => {
                let Expr::Call(c) = e else { return None };
                let args: Vec<Immediate> = c.args.iter().map(Expr::as_immediate).collect::<Option<_>>()?;
                match &c.target {
                    CallTarget::Static(class) => {
                        Some(Statement::SCall { dst: dst.clone(), class: class.clone(), func: c.func.clone(), args })
                    }
                    CallTarget::Virtual(r) => match r.as_ref() {
                        Expr::LValue(LValue::Var(recv)) => Some(Statement::VCall {
                            dst: dst.clone(),
                            receiver: recv.clone(),
                            func: c.func.clone(),
                            args,
                        }),
                        _ => None,
                    },
                }
            }
            _ => None,
        }
    }

    /// Uses `reference` for everything outside the hole line.
    pub fn with_reference(mut self, reference: &Program) -> Sketch {
        self.reference = reference.clone();
        self
    }

    pub fn complete(&self, e: &Expr) -> Option<Program> {
        self.fill(e).map(|s| self.reference.with_statement(self.line, s))
    }

    /// The sketch line with `??` for the hole.
    pub fn text(&self) -> String {
        let hole = Expr::var("??");
        match self.kind {
            HoleKind::ReturnValue => "return ??".to_string(),
            HoleKind::CallExpr => match &self.original {
                Statement::SCall { dst, .. } | Statement::VCall { dst, .. } => format!("{dst} = ??"),
                _ => "??".into(),
            },
            _ => self.fill(&hole).map(|s| statement_text(&s, &self.program.strings)).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Production applications allowed per candidate.
    pub max_expansions: usize,
    pub bounds: ExecBounds,
    /// Run full verification on fast-path rejections too and count
    /// disagreements.
    pub audit_fast_path: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { max_expansions: 6, bounds: ExecBounds::default(), audit_fast_path: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthStats {
    pub candidates: usize,
    pub fast_rejected: usize,
    pub verify_rejected: usize,
    pub expansions: usize,
    /// Fast-path rejections that full verification would have accepted.
    /// Only counted when auditing.
    pub fast_path_violations: usize,
}

#[derive(Debug, Clone)]
pub struct SynthResult {
    pub program: Option<Program>,
    pub patch: Option<Statement>,
    pub expr: Option<Expr>,
    pub stats: SynthStats,
}

enum Fast {
    Reject,
    Pass,
}

/// Checks `e` against the pre-state and required post-value of each test
/// that reaches the hole once. Unknown heap reads and bound exhaustion
/// make a test inconclusive.
fn fast_check(s: &Sketch, e: &Expr, states: &[TestStates], bounds: &ExecBounds) -> Fast {
    for st in states {
        let TestStates::Reached(ls) = st else { continue };
        let Some(want) = ls.post else { continue };
        let mut m = Machine::new(&s.program, *bounds);
        m.heap = ls.pre.heap.clone();
        let vars = ls.pre.vars.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let r = m.eval(&vars, e);
        if m.heap.misses() > 0 {
            continue;
        }
        let got = match r {
            Ok(v) if s.kind == HoleKind::JumpCond => (v != 0) as i64,
            Ok(v) => v,
            Err(Halt::Stuck(_)) => return Fast::Reject,
            Err(Halt::Bound) => continue,
        };
        if got != want {
            return Fast::Reject;
        }
    }
    Fast::Pass
}

/// Depth-first search for a fill of the hole that passes every test.
/// `fast` holds per-test states of the hole line for pre-filtering; it is
/// ignored for call holes.
pub fn complete_sketch(
    s: &Sketch,
    g: &Grammar,
    tests: &[UnitTest],
    cfg: &SynthConfig,
    fast: Option<&[TestStates]>,
) -> SynthResult {
    let fast = fast.filter(|_| s.kind != HoleKind::CallExpr);
    let mut stats = SynthStats::default();
    let mut found: Option<(Expr, Statement, Program)> = None;
    stats.expansions = g.search(cfg.max_expansions, &mut |e| {
        let Some(stmt) = s.fill(e) else {
            return ControlFlow::Continue(());
        };
        stats.candidates += 1;
        let candidate = s.reference.with_statement(s.line, stmt.clone());
        if let Some(states) = fast {
            if let Fast::Reject = fast_check(s, e, states, &cfg.bounds) {
                stats.fast_rejected += 1;
                if cfg.audit_fast_path && verify(&candidate, tests, &cfg.bounds) {
                    stats.fast_path_violations += 1;
                }
                return ControlFlow::Continue(());
            }
        }
        if verify(&candidate, tests, &cfg.bounds) {
            found = Some((e.clone(), stmt, candidate));
            ControlFlow::Break(())
        } else {
            stats.verify_rejected += 1;
            ControlFlow::Continue(())
        }
    });
    match found {
        Some((e, stmt, prog)) => SynthResult { program: Some(prog), patch: Some(stmt), expr: Some(e), stats },
        None => SynthResult { program: None, patch: None, expr: None, stats },
    }
}
