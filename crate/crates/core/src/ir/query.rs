//! Control-flow and call-graph queries.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use super::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("unknown function {0}")]
    UnknownFunction(FuncSig),
    #[error("unknown line {0}")]
    UnknownLine(LineId),
}

impl Program {
    fn func_or_err(&self, f: &FuncSig) -> Result<&FunctionDecl, QueryError> {
        self.function(f).ok_or_else(|| QueryError::UnknownFunction(f.clone()))
    }

    fn stmt_or_err(&self, l: LineId) -> Result<&Statement, QueryError> {
        self.statement(l).ok_or(QueryError::UnknownLine(l))
    }

    pub fn first_line(&self, f: &FuncSig) -> Result<LineId, QueryError> {
        let func = self.func_or_err(f)?;
        func.lines().min().ok_or_else(|| QueryError::UnknownFunction(f.clone()))
    }

    /// `l1` is a control-flow predecessor of `l2`.
    pub fn is_prev_line(&self, l1: LineId, l2: LineId) -> Result<bool, QueryError> {
        let s1 = self.stmt_or_err(l1)?;
        self.stmt_or_err(l2)?;
        let same_func = self.function_of_line(l1) == self.function_of_line(l2);
        let fallthrough = same_func && l2.0 == l1.0 + 1 && !matches!(s1, Statement::Return(_) | Statement::Trap);
        let jump = matches!(s1, Statement::Jump(_, t) if *t == l2);
        Ok(fallthrough || jump)
    }

    /// Functions a virtual call named `func`/`arity` may dispatch to.
    pub fn virtual_candidates(&self, func: &str, arity: usize) -> Vec<FuncSig> {
        self.classes
            .iter()
            .filter(|c| c.functions.iter().any(|f| !f.is_static && f.name == func && f.params.len() == arity))
            .map(|c| FuncSig::new(&c.name, func, arity))
            .collect()
    }

    /// Signatures a statement may invoke, including calls nested in
    /// expressions.
    pub fn statement_callees(&self, s: &Statement) -> BTreeSet<FuncSig> {
        let mut out = BTreeSet::new();
        match s {
            Statement::SCall { class, func, args, .. } => {
                let sig = FuncSig::new(class, func, args.len());
                if self.function(&sig).is_some() {
                    out.insert(sig);
                }
            }
            Statement::VCall { func, args, .. } => {
                out.extend(self.virtual_candidates(func, args.len()));
            }
            _ => {}
        }
        for e in s.exprs() {
            self.expr_callees(&e, &mut out);
        }
        out
    }

    fn expr_callees(&self, e: &Expr, out: &mut BTreeSet<FuncSig>) {
        match e {
            Expr::LValue(_) | Expr::Const(_) => {}
            Expr::Unary(_, x) => self.expr_callees(x, out),
            Expr::Binary(_, a, b) => {
                self.expr_callees(a, out);
                self.expr_callees(b, out);
            }
            Expr::Call(c) => {
                match &c.target {
                    CallTarget::Static(class) => {
                        let sig = FuncSig::new(class, &c.func, c.args.len());
                        if self.function(&sig).is_some() {
                            out.insert(sig);
                        }
                    }
                    CallTarget::Virtual(r) => {
                        self.expr_callees(r, out);
                        out.extend(self.virtual_candidates(&c.func, c.args.len()));
                    }
                }
                for a in &c.args {
                    self.expr_callees(a, out);
                }
            }
        }
    }

    /// Direct callees of `f`.
    pub fn callees(&self, f: &FuncSig) -> Result<BTreeSet<FuncSig>, QueryError> {
        let func = self.func_or_err(f)?;
        Ok(func.body.iter().flat_map(|(_, s)| self.statement_callees(s)).collect())
    }

    /// `f` together with every function it transitively invokes.
    pub fn transitive_callees(&self, f: &FuncSig) -> Result<BTreeSet<FuncSig>, QueryError> {
        self.func_or_err(f)?;
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([f.clone()]);
        while let Some(g) = queue.pop_front() {
            if !seen.insert(g.clone()) {
                continue;
            }
            if let Ok(cs) = self.callees(&g) {
                queue.extend(cs.into_iter().filter(|c| !seen.contains(c)));
            }
        }
        Ok(seen)
    }

    /// Lines of `f` and of all of its transitive callees.
    pub fn trans_in_func(&self, f: &FuncSig) -> Result<BTreeSet<LineId>, QueryError> {
        Ok(self.transitive_callees(f)?.iter().filter_map(|g| self.function(g)).flat_map(|g| g.lines()).collect())
    }

    /// True for call statements with at least one callee that has a
    /// concrete (non-abstracted) body to descend into.
    pub fn is_call_stmt(&self, l: LineId) -> Result<bool, QueryError> {
        let s = self.stmt_or_err(l)?;
        if !s.is_call() {
            return Ok(false);
        }
        Ok(self.concrete_callees(s).next().is_some())
    }

    pub fn concrete_callees<'a>(&'a self, s: &Statement) -> impl Iterator<Item = FuncSig> + 'a {
        let sigs: Vec<FuncSig> = match s {
            Statement::SCall { class, func, args, .. } => vec![FuncSig::new(class, func, args.len())],
            Statement::VCall { func, args, .. } => self.virtual_candidates(func, args.len()),
            _ => vec![],
        };
        sigs.into_iter().filter(move |g| self.function(g).is_some_and(|f| !f.is_abstracted() && !f.body.is_empty()))
    }

    /// Functions from which `target` is reachable through calls
    /// (including `target`).
    pub fn callers_closure(&self, target: &FuncSig) -> BTreeSet<FuncSig> {
        let all = self.signatures();
        let mut reach: BTreeSet<FuncSig> = BTreeSet::from([target.clone()]);
        loop {
            let mut changed = false;
            for g in &all {
                if reach.contains(g) {
                    continue;
                }
                if let Ok(cs) = self.callees(g) {
                    if cs.iter().any(|c| reach.contains(c)) {
                        reach.insert(g.clone());
                        changed = true;
                    }
                }
            }
            if !changed {
                return reach;
            }
        }
    }
}
