//! Expression grammars and their bounded top-down enumeration.
//!
//! Enumeration goes by increasing size, where every production
//! application costs one expansion. Within one size it expands the
//! leftmost non-terminal first and tries the productions of a
//! non-terminal in ascending order of minimal completion cost, ties broken
//! by declaration order.

use std::cell::Cell;
use std::collections::HashSet;
use std::fmt;
use std::ops::ControlFlow;

use crate::ir::{BinOp, CallExpr, CallTarget, Expr, UnOp};

pub type NtId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CallShape {
    Static(String),
    Virtual(NtId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rhs {
    Leaf(Expr),
    Unary(UnOp, NtId),
    Binary(BinOp, NtId, NtId),
    Call { target: CallShape, func: String, args: Vec<NtId> },
}

impl Rhs {
    /// Non-terminals in left-to-right order.
    pub fn children(&self) -> Vec<NtId> {
        match self {
            Rhs::Leaf(_) => vec![],
            Rhs::Unary(_, a) => vec![*a],
            Rhs::Binary(_, a, b) => vec![*a, *b],
            Rhs::Call { target, args, .. } => {
                let mut v = Vec::with_capacity(args.len() + 1);
                if let CallShape::Virtual(r) = target {
                    v.push(*r);
                }
                v.extend(args);
                v
            }
        }
    }

    /// Builds the expression from completed children, given in
    /// [`Rhs::children`] order.
    pub fn build(&self, mut kids: Vec<Expr>) -> Expr {
        match self {
            Rhs::Leaf(e) => e.clone(),
            Rhs::Unary(op, _) => Expr::Unary(*op, Box::new(kids.remove(0))),
            Rhs::Binary(op, _, _) => {
                let b = kids.pop().expect("two children");
                let a = kids.pop().expect("two children");
                Expr::bin(*op, a, b)
            }
            Rhs::Call { target, func, .. } => {
                let target = match target {
                    CallShape::Static(c) => CallTarget::Static(c.clone()),
                    CallShape::Virtual(_) => CallTarget::Virtual(Box::new(kids.remove(0))),
                };
                Expr::Call(CallExpr { target, func: func.clone(), args: kids })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: NtId,
    pub rhs: Rhs,
    /// Fewest expansions deriving a complete expression from this
    /// production, itself included.
    pub min_cost: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub nonterminals: Vec<String>,
    pub start: NtId,
    /// Productions grouped by left-hand side, each group in search order.
    pub productions: Vec<Production>,
    by_lhs: Vec<Vec<usize>>,
    nt_cost: Vec<Option<usize>>,
}

impl Grammar {
    /// Computes minimal costs, drops productions that derive no complete
    /// expression, and sorts each non-terminal's productions.
    pub fn new(nonterminals: Vec<String>, start: NtId, rules: Vec<(NtId, Rhs)>) -> Grammar {
        let n = nonterminals.len();
        let mut nt_cost: Vec<Option<usize>> = vec![None; n];
        let rule_cost = |rhs: &Rhs, nt_cost: &[Option<usize>]| -> Option<usize> {
            rhs.children().iter().try_fold(1usize, |acc, c| nt_cost[*c].map(|k| acc + k))
        };
        loop {
            let mut changed = false;
            for (lhs, rhs) in &rules {
                if let Some(c) = rule_cost(rhs, &nt_cost) {
                    if nt_cost[*lhs].is_none_or(|old| c < old) {
                        nt_cost[*lhs] = Some(c);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut indexed: Vec<(usize, Production)> = rules
            .into_iter()
            .enumerate()
            .filter_map(|(i, (lhs, rhs))| {
                rule_cost(&rhs, &nt_cost).map(|min_cost| (i, Production { lhs, rhs, min_cost }))
            })
            .collect();
        indexed.sort_by_key(|(i, p)| (p.lhs, p.min_cost, *i));
        let productions: Vec<Production> = indexed.into_iter().map(|(_, p)| p).collect();
        let mut by_lhs = vec![Vec::new(); n];
        for (i, p) in productions.iter().enumerate() {
            by_lhs[p.lhs].push(i);
        }
        Grammar { nonterminals, start, productions, by_lhs, nt_cost }
    }

    pub fn productions_of(&self, nt: NtId) -> impl Iterator<Item = &Production> + '_ {
        self.by_lhs[nt].iter().map(|i| &self.productions[*i])
    }

    /// Fewest expansions deriving a complete expression from `nt`.
    pub fn min_cost(&self, nt: NtId) -> Option<usize> {
        self.nt_cost[nt]
    }

    pub fn len(&self) -> usize {
        self.productions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.productions.is_empty()
    }

    /// Calls `visit` on every complete expression derivable from the start
    /// symbol in at most `k` expansions, in search order, without
    /// duplicates, until it breaks. Returns the number of production
    /// applications performed.
    pub fn search(&self, k: usize, visit: &mut dyn FnMut(&Expr) -> ControlFlow<()>) -> usize {
        let mut seen: HashSet<Expr> = HashSet::new();
        let work = Cell::new(0usize);
        for size in 1..=k {
            let flow = self.derive(self.start, size, &work, &mut |e| {
                if seen.insert(e.clone()) {
                    visit(&e)
                } else {
                    ControlFlow::Continue(())
                }
            });
            if flow.is_break() {
                break;
            }
        }
        work.get()
    }

    /// Completions of `nt` using exactly `size` expansions.
    fn derive(
        &self,
        nt: NtId,
        size: usize,
        work: &Cell<usize>,
        k: &mut dyn FnMut(Expr) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        for p in self.productions_of(nt) {
            if p.min_cost > size {
                continue;
            }
            work.set(work.get() + 1);
            let kids = p.rhs.children();
            self.derive_seq(&kids, size - 1, work, &mut |es| k(p.rhs.build(es)))?;
        }
        ControlFlow::Continue(())
    }

    /// Completions of `nts`, left to right, using exactly `size`
    /// expansions in total.
    fn derive_seq(
        &self,
        nts: &[NtId],
        size: usize,
        work: &Cell<usize>,
        k: &mut dyn FnMut(Vec<Expr>) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let Some((first, rest)) = nts.split_first() else {
            return if size == 0 { k(Vec::new()) } else { ControlFlow::Continue(()) };
        };
        let cost = |n: &NtId| self.nt_cost[*n].unwrap_or(usize::MAX / 4);
        let reserve: usize = rest.iter().map(cost).sum();
        if reserve + cost(first) > size {
            return ControlFlow::Continue(());
        }
        for s1 in cost(first)..=size - reserve {
            self.derive(*first, s1, work, &mut |e| {
                self.derive_seq(rest, size - s1, work, &mut |mut es| {
                    es.insert(0, e.clone());
                    k(es)
                })
            })?;
        }
        ControlFlow::Continue(())
    }
}

/// Every complete expression derivable in at most `k` expansions, in
/// search order.
pub fn enumerate_all(g: &Grammar, k: usize) -> Vec<Expr> {
    let mut out = Vec::new();
    g.search(k, &mut |e| {
        out.push(e.clone());
        ControlFlow::Continue(())
    });
    out
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (nt, name) in self.nonterminals.iter().enumerate() {
            let alts: Vec<String> = self
                .productions_of(nt)
                .map(|p| match &p.rhs {
                    Rhs::Leaf(e) => e.to_string(),
                    Rhs::Unary(op, a) => {
                        format!("{}{}", if *op == UnOp::Not { "!" } else { "-" }, self.nonterminals[*a])
                    }
                    Rhs::Binary(op, a, b) => {
                        format!("{} {} {}", self.nonterminals[*a], op.symbol(), self.nonterminals[*b])
                    }
                    Rhs::Call { target, func, args } => {
                        let args: Vec<&str> = args.iter().map(|a| self.nonterminals[*a].as_str()).collect();
                        match target {
                            CallShape::Static(c) => format!("{c}.{func}({})", args.join(", ")),
                            CallShape::Virtual(r) => format!("{}.{func}({})", self.nonterminals[*r], args.join(", ")),
                        }
                    }
                })
                .collect();
            if !alts.is_empty() {
                writeln!(f, "{name} ::= {}", alts.join(" | "))?;
            }
        }
        Ok(())
    }
}
