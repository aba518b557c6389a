//! Per-line trace encoding of unrolled function bodies.
//!
//! Every reachable unrolled line `j` gets a selector `π_j` defined as the
//! disjunction of its incoming edge guards, so the selected lines of a
//! model form exactly one path. Variables live in SSA terms; the heap is
//! an array term versioned at every line that writes it. Joins merge
//! values with `ite` over the incoming guards.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ir::*;
use crate::smt::{Sort, Term};
use crate::testkit::UnrolledBody;

use super::{alloc_at, Encoder, Region};

/// Location of an lvalue: a variable slot or a heap address.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Address {
    /// Negative slot address of a local variable.
    Stack(i64),
    Heap(Term),
}

/// Symbolic machine state before a line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub vars: Vec<Term>,
    pub mem: Term,
}

/// One execution of a candidate line inside an encoding.
#[derive(Debug, Clone)]
pub struct Occurrence {
    pub line: LineId,
    pub pi: Term,
    pub vars: Vec<(String, Term)>,
    pub mem: Term,
    /// Assigned value, jump condition, or returned value. `None` for
    /// calls.
    pub value: Option<Term>,
    /// Inline nesting depth (0 = test entry).
    pub depth: usize,
}

/// A return reached on some path.
#[derive(Debug, Clone)]
pub struct Exit {
    pub pi: Term,
    pub ret: Term,
    pub mem: Term,
}

/// Which function a call invokes.
#[derive(Debug, Clone)]
pub enum Callee {
    Static(FuncSig),
    Virtual { name: String, arity: usize, recv: Term },
}

pub struct TraceBuilder<'e, 'p> {
    pub(super) enc: &'e Encoder<'p>,
    pub(super) region: &'e Region,
    prefix: String,
    counter: usize,
    pub constraints: Vec<Term>,
    pub dt: Term,
    pub trace: Vec<(LineId, Term)>,
    pub occurrences: Vec<Occurrence>,
    stack: Vec<FuncSig>,
    record: bool,
}

pub fn guard_var(l: LineId) -> Term {
    Term::var(format!("b{}", l.0), Sort::Bool)
}

fn to_int(t: Term) -> Term {
    if t.sort() == Sort::Bool {
        Term::ite(t, Term::int(1), Term::int(0))
    } else {
        t
    }
}

fn to_bool(t: Term) -> Term {
    if t.sort() == Sort::Bool {
        t
    } else {
        Term::ne(t, Term::int(0))
    }
}

impl<'e, 'p> TraceBuilder<'e, 'p> {
    pub fn new(enc: &'e Encoder<'p>, region: &'e Region, prefix: &str, dt: Term, record: bool) -> Self {
        TraceBuilder {
            enc,
            region,
            prefix: prefix.to_string(),
            counter: 0,
            constraints: Vec::new(),
            dt,
            trace: Vec::new(),
            occurrences: Vec::new(),
            stack: Vec::new(),
            record,
        }
    }

    pub fn fresh(&mut self, kind: &str, sort: Sort) -> Term {
        self.counter += 1;
        Term::var(format!("{}{kind}{}", self.prefix, self.counter), sort)
    }

    pub fn fresh_prefix(&mut self, kind: &str) -> String {
        self.counter += 1;
        format!("{}{kind}{}.", self.prefix, self.counter)
    }

    fn require(&mut self, t: Term) {
        if t.as_bool() != Some(true) {
            self.constraints.push(t);
        }
    }

    /// Binds `t` to a fresh variable unless it is already an atom.
    fn atomize(&mut self, t: Term, kind: &str) -> Term {
        if t.is_atom() {
            return t;
        }
        let v = self.fresh(kind, t.sort());
        self.require(Term::eq(v.clone(), t));
        v
    }

    /// Marks `sig` as active, for recursion bounding of the body about
    /// to be encoded.
    pub fn push_frame(&mut self, sig: FuncSig) {
        self.stack.push(sig);
    }

    fn p(&self) -> &'p Program {
        self.enc.p
    }

    // ---- addresses and expressions ----

    /// Dereference check and offset of `base.field`.
    fn field_location(&self, base: &Term, field: &str) -> (Term, Term) {
        let decls: Vec<(i64, i64)> = self
            .p()
            .classes
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.fields.iter().position(|f| f.name == field).map(|o| (i as i64 + 1, o as i64)))
            .collect();
        let dtb = Term::select(self.dt.clone(), base.clone());
        let ok = Term::and2(
            Term::ne(base.clone(), Term::int(0)),
            Term::or(decls.iter().map(|(cid, _)| Term::eq(dtb.clone(), Term::int(*cid)))),
        );
        let off = match decls.as_slice() {
            [] => Term::int(0),
            [(_, o), rest @ ..] if rest.iter().all(|(_, x)| x == o) => Term::int(*o),
            _ => {
                let (last, init) = decls.split_last().unwrap();
                init.iter().rev().fold(Term::int(last.1), |acc, (cid, o)| {
                    Term::ite(Term::eq(dtb.clone(), Term::int(*cid)), Term::int(*o), acc)
                })
            }
        };
        (ok, off)
    }

    fn imm(&self, names: &[String], st: &State, i: &Immediate) -> Term {
        match i {
            Immediate::Var(v) => var_term(names, st, v),
            Immediate::Const(c) => Term::int(c.value()),
        }
    }

    /// Address of `lv`; heap addresses come with the condition under
    /// which the access is defined.
    pub fn encode_addr(&self, names: &[String], st: &State, lv: &LValue) -> (Address, Term) {
        match lv {
            LValue::Var(x) => {
                let slot = names.iter().position(|n| n == x).unwrap_or(names.len());
                (Address::Stack(-(slot as i64) - 2), Term::bool(true))
            }
            LValue::Field(b, a) => {
                let base = var_term(names, st, b);
                let (ok, off) = self.field_location(&base, a);
                (Address::Heap(Term::add(base, off)), ok)
            }
            LValue::Index(b, i) => {
                let base = var_term(names, st, b);
                let ok = Term::ne(base.clone(), Term::int(0));
                (Address::Heap(Term::add(base, self.imm(names, st, i))), ok)
            }
        }
    }

    /// Value of `e` in state `st`. Definedness conditions (null checks,
    /// nonzero divisors, dispatch, callee completion) are required under `guard`, the
    /// condition under which `e` is evaluated.
    pub fn encode_expr(&mut self, names: &[String], st: &State, e: &Expr, guard: &Term) -> Term {
        match e {
            Expr::Const(Const::Bool(b)) => Term::bool(*b),
            Expr::Const(c) => Term::int(c.value()),
            Expr::LValue(LValue::Var(x)) => var_term(names, st, x),
            Expr::LValue(lv) => {
                let (addr, ok) = self.encode_addr(names, st, lv);
                self.require(Term::implies(guard.clone(), ok));
                match addr {
                    Address::Heap(a) => Term::select(st.mem.clone(), a),
                    Address::Stack(_) => unreachable!("variables handled above"),
                }
            }
            Expr::Unary(UnOp::Not, x) => Term::not(to_bool(self.encode_expr(names, st, x, guard))),
            Expr::Unary(UnOp::Neg, x) => Term::neg(to_int(self.encode_expr(names, st, x, guard))),
            Expr::Binary(BinOp::And, a, b) => {
                let x = to_bool(self.encode_expr(names, st, a, guard));
                let y = to_bool(self.encode_expr(names, st, b, &Term::and2(guard.clone(), x.clone())));
                Term::and2(x, y)
            }
            Expr::Binary(BinOp::Or, a, b) => {
                let x = to_bool(self.encode_expr(names, st, a, guard));
                let y = to_bool(self.encode_expr(names, st, b, &Term::and2(guard.clone(), Term::not(x.clone()))));
                Term::or([x, y])
            }
            Expr::Binary(op, a, b) => {
                let x = self.encode_expr(names, st, a, guard);
                let y = self.encode_expr(names, st, b, guard);
                if matches!(op, BinOp::Div | BinOp::Rem) {
                    let nonzero = Term::not(Term::eq(to_int(y.clone()), Term::int(0)));
                    self.require(Term::implies(guard.clone(), nonzero));
                }
                binop_term(*op, x, y)
            }
            Expr::Call(c) => {
                let (callee, mut args) = match &c.target {
                    CallTarget::Static(class) => (Callee::Static(FuncSig::new(class, &c.func, c.args.len())), vec![]),
                    CallTarget::Virtual(r) => {
                        let recv = to_int(self.encode_expr(names, st, r, guard));
                        let recv = self.atomize(recv, "rv");
                        (Callee::Virtual { name: c.func.clone(), arity: c.args.len(), recv: recv.clone() }, vec![recv])
                    }
                };
                for a in &c.args {
                    let v = to_int(self.encode_expr(names, st, a, guard));
                    args.push(self.atomize(v, "a"));
                }
                // Heap effects of expression calls are discarded.
                let (ret, _) = self.call(callee, args, st.mem.clone(), guard.clone());
                ret
            }
        }
    }

    // ---- calls ----

    /// Encodes a call happening exactly when `entry` holds. `args`
    /// includes the receiver for virtual calls. Returns fresh result and
    /// memory variables, unconstrained when `entry` is false.
    pub fn call(&mut self, callee: Callee, args: Vec<Term>, mem: Term, entry: Term) -> (Term, Term) {
        let r = self.fresh("r", Sort::Int);
        let m = self.fresh("m", Sort::Mem);
        match callee {
            Callee::Static(sig) => match self.p().function(&sig) {
                Some(f) if f.is_static => self.invoke(&sig, args, mem, entry, &r, &m),
                _ => self.require(Term::not(entry)),
            },
            Callee::Virtual { name, arity, recv } => {
                let cands = self.p().virtual_candidates(&name, arity);
                let dtr = Term::select(self.dt.clone(), recv.clone());
                let mut any = Vec::new();
                for sig in cands {
                    let cid = Term::int(self.p().class_id(&sig.class).unwrap_or(0));
                    let cond = Term::eq(dtr.clone(), cid);
                    any.push(cond.clone());
                    let e = Term::and2(entry.clone(), cond);
                    self.invoke(&sig, args.clone(), mem.clone(), e, &r, &m);
                }
                self.require(Term::implies(entry, Term::and2(Term::ne(recv, Term::int(0)), Term::or(any))));
            }
        }
        (r, m)
    }

    fn invoke(&mut self, sig: &FuncSig, args: Vec<Term>, mem: Term, entry: Term, r: &Term, m: &Term) {
        if entry.as_bool() == Some(false) {
            return;
        }
        let Some(f) = self.p().function(sig) else {
            self.require(Term::not(entry));
            return;
        };
        if f.model.is_none() {
            if f.body.is_empty() {
                self.require(Term::not(entry));
                return;
            }
            let depth = self.stack.iter().filter(|s| *s == sig).count();
            if depth >= self.enc.bounds.unroll_k {
                self.require(Term::not(entry));
                return;
            }
            if self.enc.should_inline(self.region, sig) {
                self.stack.push(sig.clone());
                let exits = self.encode_body(sig, args, mem, entry);
                self.stack.pop();
                for x in exits {
                    self.require(Term::implies(
                        x.pi,
                        Term::and2(Term::eq(r.clone(), x.ret), Term::eq(m.clone(), x.mem)),
                    ));
                }
                return;
            }
        }
        match self.enc.summary(sig) {
            Ok(s) => {
                let prefix = self.fresh_prefix("i");
                let inst = s.instantiate(&prefix, &args, &mem, &self.dt, r, m);
                self.require(Term::implies(entry, inst));
            }
            Err(_) => self.require(Term::not(entry)),
        }
    }

    // ---- bodies ----

    /// Encodes the unrolled body of `sig`, entered when `entry` holds.
    pub fn encode_body(&mut self, sig: &FuncSig, args: Vec<Term>, mem: Term, entry: Term) -> Vec<Exit> {
        let func = self.p().function(sig).expect("encoded function exists");
        let body: Arc<UnrolledBody> = self.enc.body(sig);
        let names = func.variables();
        let mut vars: Vec<Term> = vec![Term::int(0); names.len()];
        for (i, a) in args.into_iter().enumerate() {
            if i < vars.len() {
                vars[i] = a;
            }
        }
        let n = body.lines.len();
        let mut incoming: Vec<Vec<(Term, State)>> = vec![Vec::new(); n];
        if n > 0 {
            incoming[0].push((entry, State { vars, mem }));
        }
        let mut exits = Vec::new();
        let depth = self.stack.len();
        for j in 0..n {
            let edges = std::mem::take(&mut incoming[j]);
            let edges: Vec<(Term, State)> = edges.into_iter().filter(|(g, _)| g.as_bool() != Some(false)).collect();
            if edges.is_empty() {
                continue;
            }
            let ul = &body.lines[j];
            let reach = Term::or(edges.iter().map(|(g, _)| g.clone()));
            if matches!(ul.stmt, Statement::Trap) {
                self.require(Term::not(reach));
                continue;
            }
            let pi = self.atomize_bool(reach, "p");
            let st = self.join(&edges);
            let origin = ul.origin.expect("non-trap lines have an origin");
            if self.record {
                self.trace.push((origin, pi.clone()));
            }
            let cand = self.region.candidates.contains(&origin);
            let g = if cand { Term::and2(pi.clone(), guard_var(origin)) } else { pi.clone() };
            let mut value = None;
            let pre = st.clone();
            match &ul.stmt {
                Statement::Assign(lv, e) => {
                    let val = to_int(self.encode_expr(&names, &st, e, &g));
                    let v = if cand {
                        let v = self.fresh("v", Sort::Int);
                        self.require(Term::implies(g.clone(), Term::eq(v.clone(), val)));
                        v
                    } else {
                        self.atomize(val, "v")
                    };
                    value = Some(v.clone());
                    let (addr, ok) = self.encode_addr(&names, &st, lv);
                    self.require(Term::implies(g.clone(), ok));
                    let mut next = st;
                    match addr {
                        Address::Stack(_) => set_var(&names, &mut next, lv.base(), v),
                        Address::Heap(a) => {
                            let m = Term::store(next.mem.clone(), a, v);
                            next.mem = self.atomize(m, "M");
                        }
                    }
                    incoming[j + 1].push((pi.clone(), next));
                }
                Statement::Jump(e, t) => {
                    let c = to_bool(self.encode_expr(&names, &st, e, &g));
                    let br = if cand {
                        let br = self.fresh("br", Sort::Bool);
                        self.require(Term::implies(g.clone(), Term::eq(br.clone(), c)));
                        br
                    } else {
                        self.atomize_bool(c, "br")
                    };
                    value = Some(br.clone());
                    let ti = t.0 as usize;
                    incoming[ti].push((Term::and2(pi.clone(), br.clone()), st.clone()));
                    incoming[j + 1].push((Term::and2(pi.clone(), Term::not(br)), st));
                }
                Statement::Return(i) => {
                    let val = self.imm(&names, &st, i);
                    let v = if cand {
                        let v = self.fresh("v", Sort::Int);
                        self.require(Term::implies(g.clone(), Term::eq(v.clone(), val)));
                        v
                    } else {
                        val
                    };
                    value = Some(v.clone());
                    exits.push(Exit { pi: pi.clone(), ret: v, mem: st.mem.clone() });
                }
                Statement::New(x, c) => {
                    let mut next = st;
                    let a = Term::select(next.mem.clone(), Term::int(crate::testkit::HEAP_TOP));
                    let a = self.atomize(a, "o");
                    match alloc_at(self.p(), c, &next.mem, &a, &self.dt) {
                        Some((m, fact)) => {
                            next.mem = self.atomize(m, "M");
                            self.require(Term::implies(pi.clone(), fact));
                            set_var(&names, &mut next, x, a);
                        }
                        None => self.require(Term::not(pi.clone())),
                    }
                    incoming[j + 1].push((pi.clone(), next));
                }
                Statement::SCall { dst, class, func: f, args } => {
                    let vals: Vec<Term> = args.iter().map(|a| self.imm(&names, &st, a)).collect();
                    let (r, m) =
                        self.call(Callee::Static(FuncSig::new(class, f, args.len())), vals, st.mem.clone(), g.clone());
                    let mut next = st;
                    set_var(&names, &mut next, dst, r);
                    next.mem = m;
                    incoming[j + 1].push((pi.clone(), next));
                }
                Statement::VCall { dst, receiver, func: f, args } => {
                    let recv = var_term(&names, &st, receiver);
                    let vals: Vec<Term> =
                        std::iter::once(recv.clone()).chain(args.iter().map(|a| self.imm(&names, &st, a))).collect();
                    let callee = Callee::Virtual { name: f.clone(), arity: args.len(), recv };
                    let (r, m) = self.call(callee, vals, st.mem.clone(), g.clone());
                    let mut next = st;
                    set_var(&names, &mut next, dst, r);
                    next.mem = m;
                    incoming[j + 1].push((pi.clone(), next));
                }
                Statement::Trap => unreachable!(),
            }
            if cand && self.record {
                self.occurrences.push(Occurrence {
                    line: origin,
                    pi: pi.clone(),
                    vars: names.iter().cloned().zip(pre.vars).collect(),
                    mem: pre.mem,
                    value,
                    depth,
                });
            }
        }
        exits
    }

    fn atomize_bool(&mut self, t: Term, kind: &str) -> Term {
        self.atomize(t, kind)
    }

    fn join(&mut self, edges: &[(Term, State)]) -> State {
        if edges.len() == 1 {
            return edges[0].1.clone();
        }
        let merge = |this: &mut Self, vals: Vec<Term>, kind: &str| -> Term {
            if vals.iter().all(|v| *v == vals[0]) {
                return vals[0].clone();
            }
            let (last, init) = vals.split_last().unwrap();
            let t = init
                .iter()
                .zip(edges)
                .rev()
                .fold(last.clone(), |acc, (v, (g, _))| Term::ite(g.clone(), v.clone(), acc));
            this.atomize(t, kind)
        };
        let nv = edges[0].1.vars.len();
        let mut vars = Vec::with_capacity(nv);
        for i in 0..nv {
            let vals: Vec<Term> = edges.iter().map(|(_, s)| s.vars[i].clone()).collect();
            vars.push(merge(self, vals, "x"));
        }
        let mems: Vec<Term> = edges.iter().map(|(_, s)| s.mem.clone()).collect();
        let mem = merge(self, mems, "M");
        State { vars, mem }
    }
}

fn var_term(names: &[String], st: &State, x: &str) -> Term {
    match names.iter().position(|n| n == x) {
        Some(i) => st.vars[i].clone(),
        None => Term::int(0),
    }
}

fn set_var(names: &[String], st: &mut State, x: &str, v: Term) {
    if let Some(i) = names.iter().position(|n| n == x) {
        st.vars[i] = v;
    }
}

/// Strict operator application on encoded operands.
pub fn binop_term(op: BinOp, x: Term, y: Term) -> Term {
    use crate::smt::Op;
    match op {
        BinOp::Eq | BinOp::Ne => {
            let eq = if x.sort() == Sort::Bool && y.sort() == Sort::Bool {
                Term::eq(x, y)
            } else {
                Term::eq(to_int(x), to_int(y))
            };
            if op == BinOp::Eq {
                eq
            } else {
                Term::not(eq)
            }
        }
        BinOp::And => Term::and2(to_bool(x), to_bool(y)),
        BinOp::Or => Term::or([to_bool(x), to_bool(y)]),
        _ => {
            let (x, y) = (to_int(x), to_int(y));
            match op {
                BinOp::Add => Term::add(x, y),
                BinOp::Sub => Term::sub(x, y),
                BinOp::Mul => Term::mul(x, y),
                BinOp::Div => Term::tdiv(x, y),
                BinOp::Rem => Term::trem(x, y),
                BinOp::Lt => Term::lt(x, y),
                BinOp::Le => Term::le(x, y),
                BinOp::Gt => Term::lt(y, x),
                BinOp::Ge => Term::le(y, x),
                BinOp::BitAnd => Term::bitop(Op::BvAnd, x, y),
                BinOp::BitOr => Term::bitop(Op::BvOr, x, y),
                BinOp::BitXor => Term::bitop(Op::BvXor, x, y),
                BinOp::Shl => Term::bitop(Op::Shl, x, y),
                BinOp::Shr => Term::bitop(Op::AShr, x, y),
                BinOp::UShr => Term::bitop(Op::LShr, x, y),
                _ => unreachable!(),
            }
        }
    }
}

/// Candidate occurrences grouped by line.
pub fn occurrences_by_line(occ: &[Occurrence]) -> BTreeMap<LineId, Vec<&Occurrence>> {
    let mut out: BTreeMap<LineId, Vec<&Occurrence>> = BTreeMap::new();
    for o in occ {
        out.entry(o.line).or_default().push(o);
    }
    out
}
