//! Hash-consed-free term trees with light simplification at construction.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    /// `(Array Int Int)`
    Mem,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("Int"),
            Sort::Bool => f.write_str("Bool"),
            Sort::Mem => f.write_str("(Array Int Int)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Not,
    And,
    Or,
    Implies,
    Ite,
    Eq,
    Lt,
    Le,
    Add,
    Sub,
    Mul,
    Neg,
    /// SMT-LIB Euclidean `div`
    Div,
    Mod,
    Select,
    Store,
    /// Constant array; one Int argument.
    ConstMem,
    BvAnd,
    BvOr,
    BvXor,
    Shl,
    AShr,
    LShr,
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Int(i64),
    Bool(bool),
    Var(String, Sort),
    App(Op, Vec<Term>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term(Arc<Node>);

fn mk(op: Op, args: Vec<Term>) -> Term {
    Term(Arc::new(Node::App(op, args)))
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn int(v: i64) -> Term {
        Term(Arc::new(Node::Int(v)))
    }

    pub fn bool(b: bool) -> Term {
        Term(Arc::new(Node::Bool(b)))
    }

    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term(Arc::new(Node::Var(name.into(), sort)))
    }

    pub fn as_int(&self) -> Option<i64> {
        match *self.0 {
            Node::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self.0 {
            Node::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match &*self.0 {
            Node::Var(n, _) => Some(n),
            _ => None,
        }
    }

    /// Constants and variables.
    pub fn is_atom(&self) -> bool {
        !matches!(*self.0, Node::App(..))
    }

    pub fn sort(&self) -> Sort {
        match &*self.0 {
            Node::Int(_) => Sort::Int,
            Node::Bool(_) => Sort::Bool,
            Node::Var(_, s) => *s,
            Node::App(op, args) => match op {
                Op::Not | Op::And | Op::Or | Op::Implies | Op::Eq | Op::Lt | Op::Le => Sort::Bool,
                Op::Ite => args[1].sort(),
                Op::Store | Op::ConstMem => Sort::Mem,
                _ => Sort::Int,
            },
        }
    }

    pub fn not(a: Term) -> Term {
        match a.node() {
            Node::Bool(b) => Term::bool(!b),
            Node::App(Op::Not, xs) => xs[0].clone(),
            _ => mk(Op::Not, vec![a]),
        }
    }

    pub fn and(xs: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for x in xs {
            match x.node() {
                Node::Bool(true) => {}
                Node::Bool(false) => return Term::bool(false),
                Node::App(Op::And, ys) => out.extend(ys.iter().cloned()),
                _ => out.push(x),
            }
        }
        match out.len() {
            0 => Term::bool(true),
            1 => out.pop().unwrap(),
            _ => mk(Op::And, out),
        }
    }

    pub fn or(xs: impl IntoIterator<Item = Term>) -> Term {
        let mut out = Vec::new();
        for x in xs {
            match x.node() {
                Node::Bool(false) => {}
                Node::Bool(true) => return Term::bool(true),
                Node::App(Op::Or, ys) => out.extend(ys.iter().cloned()),
                _ => out.push(x),
            }
        }
        match out.len() {
            0 => Term::bool(false),
            1 => out.pop().unwrap(),
            _ => mk(Op::Or, out),
        }
    }

    pub fn and2(a: Term, b: Term) -> Term {
        Term::and([a, b])
    }

    pub fn implies(a: Term, b: Term) -> Term {
        match (a.as_bool(), b.as_bool()) {
            (Some(true), _) => b,
            (Some(false), _) | (_, Some(true)) => Term::bool(true),
            (_, Some(false)) => Term::not(a),
            _ => mk(Op::Implies, vec![a, b]),
        }
    }

    pub fn ite(c: Term, t: Term, e: Term) -> Term {
        match c.as_bool() {
            Some(true) => t,
            Some(false) => e,
            None if t == e => t,
            None => match (t.as_bool(), e.as_bool()) {
                (Some(true), Some(false)) => c,
                (Some(false), Some(true)) => Term::not(c),
                _ => mk(Op::Ite, vec![c, t, e]),
            },
        }
    }

    pub fn eq(a: Term, b: Term) -> Term {
        if a == b {
            return Term::bool(true);
        }
        match (a.node(), b.node()) {
            (Node::Int(x), Node::Int(y)) => Term::bool(x == y),
            (Node::Bool(x), Node::Bool(y)) => Term::bool(x == y),
            (_, Node::Bool(true)) => a,
            (Node::Bool(true), _) => b,
            (_, Node::Bool(false)) => Term::not(a),
            (Node::Bool(false), _) => Term::not(b),
            _ => match offset_diff(&a, &b) {
                Some(d) => Term::bool(d == 0),
                None => mk(Op::Eq, vec![a, b]),
            },
        }
    }

    pub fn ne(a: Term, b: Term) -> Term {
        Term::not(Term::eq(a, b))
    }

    pub fn lt(a: Term, b: Term) -> Term {
        match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => Term::bool(x < y),
            _ => mk(Op::Lt, vec![a, b]),
        }
    }

    pub fn le(a: Term, b: Term) -> Term {
        match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => Term::bool(x <= y),
            _ => mk(Op::Le, vec![a, b]),
        }
    }

    pub fn add(a: Term, b: Term) -> Term {
        match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => match x.checked_add(y) {
                Some(v) => Term::int(v),
                None => mk(Op::Add, vec![a, b]),
            },
            (Some(0), _) => b,
            (_, Some(0)) => a,
            (None, Some(y)) => match a.node() {
                // (x + c1) + c2 → x + (c1 + c2)
                Node::App(Op::Add, xs) if xs[1].as_int().is_some() => match xs[1].as_int().unwrap().checked_add(y) {
                    Some(c) => Term::add(xs[0].clone(), Term::int(c)),
                    None => mk(Op::Add, vec![a, b]),
                },
                _ => mk(Op::Add, vec![a, b]),
            },
            _ => mk(Op::Add, vec![a, b]),
        }
    }

    pub fn sub(a: Term, b: Term) -> Term {
        match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => match x.checked_sub(y) {
                Some(v) => Term::int(v),
                None => mk(Op::Sub, vec![a, b]),
            },
            (_, Some(0)) => a,
            _ => mk(Op::Sub, vec![a, b]),
        }
    }

    pub fn mul(a: Term, b: Term) -> Term {
        match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => match x.checked_mul(y) {
                Some(v) => Term::int(v),
                None => mk(Op::Mul, vec![a, b]),
            },
            (Some(0), _) | (_, Some(0)) => Term::int(0),
            (Some(1), _) => b,
            (_, Some(1)) => a,
            _ => mk(Op::Mul, vec![a, b]),
        }
    }

    pub fn neg(a: Term) -> Term {
        match a.as_int().and_then(i64::checked_neg) {
            Some(v) => Term::int(v),
            None => mk(Op::Neg, vec![a]),
        }
    }

    pub fn div(a: Term, b: Term) -> Term {
        mk(Op::Div, vec![a, b])
    }

    pub fn modulo(a: Term, b: Term) -> Term {
        mk(Op::Mod, vec![a, b])
    }

    /// Truncating (round toward zero) division.
    pub fn tdiv(a: Term, b: Term) -> Term {
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            if y != 0 {
                if let Some(v) = x.checked_div(y) {
                    return Term::int(v);
                }
            }
        }
        let zero = Term::int(0);
        let a_nn = Term::le(zero.clone(), a.clone());
        let b_pos = Term::lt(zero, b.clone());
        Term::ite(
            a_nn.clone(),
            Term::ite(
                b_pos.clone(),
                Term::div(a.clone(), b.clone()),
                Term::neg(Term::div(a.clone(), Term::neg(b.clone()))),
            ),
            Term::ite(
                b_pos,
                Term::neg(Term::div(Term::neg(a.clone()), b.clone())),
                Term::div(Term::neg(a), Term::neg(b)),
            ),
        )
    }

    /// Remainder matching truncating division.
    pub fn trem(a: Term, b: Term) -> Term {
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            if y != 0 {
                if let Some(v) = x.checked_rem(y) {
                    return Term::int(v);
                }
            }
        }
        Term::sub(a.clone(), Term::mul(b.clone(), Term::tdiv(a, b)))
    }

    pub fn bitop(op: Op, a: Term, b: Term) -> Term {
        debug_assert!(matches!(op, Op::BvAnd | Op::BvOr | Op::BvXor | Op::Shl | Op::AShr | Op::LShr));
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            let s = (y & 63) as u32;
            return Term::int(match op {
                Op::BvAnd => x & y,
                Op::BvOr => x | y,
                Op::BvXor => x ^ y,
                Op::Shl => x.wrapping_shl(s),
                Op::AShr => x.wrapping_shr(s),
                _ => ((x as u64) >> s) as i64,
            });
        }
        mk(op, vec![a, b])
    }

    pub fn const_mem(default: i64) -> Term {
        mk(Op::ConstMem, vec![Term::int(default)])
    }

    pub fn select(m: Term, a: Term) -> Term {
        let mut cur = m;
        loop {
            let next = match cur.node() {
                Node::App(Op::Store, xs) => {
                    if xs[1] == a {
                        return xs[2].clone();
                    }
                    match offset_diff(&xs[1], &a) {
                        Some(0) => return xs[2].clone(),
                        Some(_) => xs[0].clone(),
                        None => break,
                    }
                }
                Node::App(Op::ConstMem, xs) => return xs[0].clone(),
                _ => break,
            };
            cur = next;
        }
        mk(Op::Select, vec![cur, a])
    }

    pub fn store(m: Term, a: Term, v: Term) -> Term {
        mk(Op::Store, vec![m, a, v])
    }

    /// Rebuilds the term with variables mapped through `f`; shared
    /// subterms are rewritten once.
    pub fn subst(&self, f: &mut dyn FnMut(&str, Sort) -> Option<Term>) -> Term {
        let mut memo: HashMap<*const Node, Term> = HashMap::new();
        self.subst_memo(f, &mut memo)
    }

    fn subst_memo(&self, f: &mut dyn FnMut(&str, Sort) -> Option<Term>, memo: &mut HashMap<*const Node, Term>) -> Term {
        let key = Arc::as_ptr(&self.0);
        if let Some(t) = memo.get(&key) {
            return t.clone();
        }
        let out = match self.node() {
            Node::Int(_) | Node::Bool(_) => self.clone(),
            Node::Var(n, s) => f(n, *s).unwrap_or_else(|| self.clone()),
            Node::App(op, args) => {
                let new: Vec<Term> = args.iter().map(|a| a.subst_memo(f, memo)).collect();
                rebuild(*op, new)
            }
        };
        memo.insert(key, out.clone());
        out
    }

    /// Every variable occurring in the term, deduplicated, in first-visit
    /// order.
    pub fn vars(&self, out: &mut Vec<(String, Sort)>, seen: &mut std::collections::HashSet<String>) {
        let mut stack = vec![self.clone()];
        let mut visited: std::collections::HashSet<*const Node> = std::collections::HashSet::new();
        while let Some(t) = stack.pop() {
            if !visited.insert(Arc::as_ptr(&t.0)) {
                continue;
            }
            match t.node() {
                Node::Var(n, s) => {
                    if seen.insert(n.clone()) {
                        out.push((n.clone(), *s));
                    }
                }
                Node::App(_, args) => stack.extend(args.iter().rev().cloned()),
                _ => {}
            }
        }
    }

    pub fn size(&self) -> usize {
        match self.node() {
            Node::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn write_smt(&self, out: &mut String) {
        match self.node() {
            Node::Int(v) => {
                if *v < 0 {
                    write!(out, "(- {})", v.unsigned_abs()).unwrap();
                } else {
                    write!(out, "{v}").unwrap();
                }
            }
            Node::Bool(b) => write!(out, "{b}").unwrap(),
            Node::Var(n, _) => out.push_str(&quote_symbol(n)),
            Node::App(op, args) => {
                let (head, close) = match op {
                    Op::Not => ("(not", ")"),
                    Op::And => ("(and", ")"),
                    Op::Or => ("(or", ")"),
                    Op::Implies => ("(=>", ")"),
                    Op::Ite => ("(ite", ")"),
                    Op::Eq => ("(=", ")"),
                    Op::Lt => ("(<", ")"),
                    Op::Le => ("(<=", ")"),
                    Op::Add => ("(+", ")"),
                    Op::Sub => ("(-", ")"),
                    Op::Mul => ("(*", ")"),
                    Op::Neg => ("(-", ")"),
                    Op::Div => ("(div", ")"),
                    Op::Mod => ("(mod", ")"),
                    Op::Select => ("(select", ")"),
                    Op::Store => ("(store", ")"),
                    Op::ConstMem => ("((as const (Array Int Int))", ")"),
                    Op::BvAnd => ("(b2s (bvand", "))"),
                    Op::BvOr => ("(b2s (bvor", "))"),
                    Op::BvXor => ("(b2s (bvxor", "))"),
                    Op::Shl => ("(b2s (bvshl", "))"),
                    Op::AShr => ("(b2s (bvashr", "))"),
                    Op::LShr => ("(b2s (bvlshr", "))"),
                };
                out.push_str(head);
                let bv = matches!(op, Op::BvAnd | Op::BvOr | Op::BvXor | Op::Shl | Op::AShr | Op::LShr);
                let shift = matches!(op, Op::Shl | Op::AShr | Op::LShr);
                for (i, a) in args.iter().enumerate() {
                    out.push(' ');
                    if !bv {
                        a.write_smt(out);
                        continue;
                    }
                    // Shift distances are taken modulo 64.
                    let masked = shift && i == 1;
                    if masked {
                        out.push_str("(bvand ");
                    }
                    out.push_str("(i2b ");
                    a.write_smt(out);
                    out.push(')');
                    if masked {
                        out.push_str(" #x000000000000003f)");
                    }
                }
                out.push_str(close);
            }
        }
    }

    pub fn to_smt(&self) -> String {
        let mut s = String::new();
        self.write_smt(&mut s);
        s
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smt())
    }
}

/// Re-applies the smart constructor for `op`.
pub fn rebuild(op: Op, mut a: Vec<Term>) -> Term {
    let take = |a: &mut Vec<Term>, i: usize| std::mem::replace(&mut a[i], Term::bool(false));
    match op {
        Op::Not => Term::not(take(&mut a, 0)),
        Op::And => Term::and(a),
        Op::Or => Term::or(a),
        Op::Implies => Term::implies(take(&mut a, 0), take(&mut a, 1)),
        Op::Ite => Term::ite(take(&mut a, 0), take(&mut a, 1), take(&mut a, 2)),
        Op::Eq => Term::eq(take(&mut a, 0), take(&mut a, 1)),
        Op::Lt => Term::lt(take(&mut a, 0), take(&mut a, 1)),
        Op::Le => Term::le(take(&mut a, 0), take(&mut a, 1)),
        Op::Add => Term::add(take(&mut a, 0), take(&mut a, 1)),
        Op::Sub => Term::sub(take(&mut a, 0), take(&mut a, 1)),
        Op::Mul => Term::mul(take(&mut a, 0), take(&mut a, 1)),
        Op::Neg => Term::neg(take(&mut a, 0)),
        Op::Select => Term::select(take(&mut a, 0), take(&mut a, 1)),
        Op::Div | Op::Mod | Op::Store | Op::ConstMem => mk(op, a),
        Op::BvAnd | Op::BvOr | Op::BvXor | Op::Shl | Op::AShr | Op::LShr => {
            Term::bitop(op, take(&mut a, 0), take(&mut a, 1))
        }
    }
}

/// `a - b` when both are `base + const` over the same base (or both
/// constants).
fn offset_diff(a: &Term, b: &Term) -> Option<i64> {
    fn split(t: &Term) -> (Option<&Term>, i64) {
        match t.node() {
            Node::Int(v) => (None, *v),
            Node::App(Op::Add, xs) if xs[1].as_int().is_some() => (Some(&xs[0]), xs[1].as_int().unwrap()),
            _ => (Some(t), 0),
        }
    }
    if a.sort() != Sort::Int || b.sort() != Sort::Int {
        return None;
    }
    let (ba, ca) = split(a);
    let (bb, cb) = split(b);
    if ba == bb {
        ca.checked_sub(cb)
    } else {
        None
    }
}

/// Symbols that are not plain SMT-LIB simple symbols get `|…|` quoting.
pub fn quote_symbol(n: &str) -> String {
    let simple = !n.is_empty()
        && !n.starts_with(|c: char| c.is_ascii_digit())
        && n.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        n.to_string()
    } else {
        format!("|{n}|")
    }
}

/// Helper functions every script needs for the bit-vector bridge.
pub const PRELUDE: &str = "(define-fun i2b ((x Int)) (_ BitVec 64) ((_ int2bv 64) x))\n\
(define-fun b2s ((x (_ BitVec 64))) Int (let ((u (bv2nat x))) (ite (>= u 9223372036854775808) (- u 18446744073709551616) u)))\n";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_through_store_with_offsets() {
        let h = Term::var("h", Sort::Int);
        let m = Term::var("m", Sort::Mem);
        let m1 = Term::store(m.clone(), Term::add(h.clone(), Term::int(1)), Term::int(7));
        assert_eq!(Term::select(m1.clone(), Term::add(h.clone(), Term::int(1))), Term::int(7));
        assert_eq!(Term::select(m1, h.clone()), Term::select(m, h));
    }

    #[test]
    fn shift_printing_masks_distance() {
        let x = Term::var("x", Sort::Int);
        let t = Term::bitop(Op::LShr, x, Term::var("y", Sort::Int));
        assert_eq!(t.to_smt(), "(b2s (bvlshr (i2b x) (bvand (i2b y) #x000000000000003f)))");
    }

    #[test]
    fn negative_literals_print_as_unary_minus() {
        assert_eq!(Term::int(-3).to_smt(), "(- 3)");
        assert_eq!(Term::int(i64::MIN).to_smt(), "(- 9223372036854775808)");
    }

    #[test]
    fn tdiv_folds_like_rust() {
        for (a, b) in [(7, 2), (-7, 2), (7, -2), (-7, -2)] {
            assert_eq!(Term::tdiv(Term::int(a), Term::int(b)).as_int(), Some(a / b));
            assert_eq!(Term::trem(Term::int(a), Term::int(b)).as_int(), Some(a % b));
        }
    }
}
