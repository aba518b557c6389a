//! Grammar generation from what is in scope at the hole.

use std::collections::{BTreeSet, HashMap};

use crate::ir::types::{infer_var_types, TypeEnv};
use crate::ir::*;

use super::grammar::{CallShape, Grammar, NtId, Rhs};
use super::{HoleKind, Sketch};

const COMPARISONS: [BinOp; 4] = [BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le];
const ARITHMETIC: [BinOp; 2] = [BinOp::Add, BinOp::Sub];

struct Builder {
    names: Vec<String>,
    index: HashMap<String, NtId>,
    rules: Vec<(NtId, Rhs)>,
}

impl Builder {
    fn nt(&mut self, name: &str) -> NtId {
        if let Some(i) = self.index.get(name) {
            return *i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    fn rule(&mut self, lhs: NtId, rhs: Rhs) {
        self.rules.push((lhs, rhs));
    }
}

fn ty_key(t: &Type) -> String {
    match t {
        Type::Int => "Int".into(),
        Type::Bool => "Bool".into(),
        Type::Class(c) => format!("Obj<{c}>"),
    }
}

struct Scope<'a> {
    p: &'a Program,
    reference: &'a Program,
    env: TypeEnv,
    vars: Vec<String>,
    consts: Vec<i64>,
    classes: BTreeSet<String>,
    /// Functions reaching the hole's function; calling them could recurse.
    excluded: BTreeSet<FuncSig>,
    int_ops: Vec<BinOp>,
    cmp_ops: Vec<BinOp>,
    neg: bool,
}

impl Scope<'_> {
    fn var_ty(&self, v: &str) -> Type {
        self.env.get(v).cloned().unwrap_or(Type::Int)
    }

    fn vars_of(&self, t: &Type) -> Vec<&String> {
        self.vars.iter().filter(|v| self.var_ty(v) == *t).collect()
    }

    /// `x.f` of type `t` for object variables `x`.
    fn fields_of(&self, t: &Type) -> Vec<Expr> {
        let mut out = Vec::new();
        for v in &self.vars {
            if let Type::Class(c) = self.var_ty(v) {
                if let Some(cd) = self.p.class(&c) {
                    for f in &cd.fields {
                        if f.ty.clone().unwrap_or(Type::Int) == *t {
                            out.push(Expr::field(v, &f.name));
                        }
                    }
                }
            }
        }
        out
    }

    fn has_nt(&self, t: &Type) -> bool {
        match t {
            Type::Class(c) => self.classes.contains(c),
            _ => true,
        }
    }

    /// Callable functions returning `t`, with their parameter types.
    fn callables(&self, t: &Type) -> Vec<(FuncSig, bool, Vec<Type>)> {
        let mut out = Vec::new();
        for c in &self.p.classes {
            for f in &c.functions {
                let sig = FuncSig::new(&c.name, &f.name, f.params.len());
                if self.reference.function(&sig).is_none()
                    || self.excluded.contains(&sig)
                    || f.ret_ty.clone().unwrap_or(Type::Int) != *t
                {
                    continue;
                }
                if !f.is_static && !self.classes.contains(&c.name) {
                    continue;
                }
                let params: Vec<Type> = f.params.iter().map(|x| x.ty.clone().unwrap_or(Type::Int)).collect();
                if params.iter().all(|x| self.has_nt(x)) {
                    out.push((sig, f.is_static, params));
                }
            }
        }
        out
    }
}

fn scope_of(s: &Sketch) -> Scope<'_> {
    let p = &s.program;
    let decl = p.function(&s.func).expect("sketch function exists");
    let env = infer_var_types(p, &s.func.class, decl);
    let vars = decl.variables();
    let mut consts = vec![0i64, 1];
    let mut ops: Vec<BinOp> = Vec::new();
    let mut neg = false;
    for (_, st) in &decl.body {
        for e in st.exprs() {
            e.visit_consts(&mut |c| {
                if let Const::Int(v) = c {
                    if !consts.contains(&v) {
                        consts.push(v);
                    }
                }
            });
            e.visit_ops(&mut |op| {
                if !ops.contains(&op) {
                    ops.push(op);
                }
            });
            neg |= has_neg(&e);
        }
    }
    let mut classes = BTreeSet::new();
    for v in &vars {
        if let Some(Type::Class(c)) = env.get(v) {
            classes.insert(c.clone());
            if let Some(cd) = p.class(c) {
                for f in &cd.fields {
                    if let Some(Type::Class(d)) = &f.ty {
                        classes.insert(d.clone());
                    }
                }
            }
        }
    }
    if let Type::Class(c) = &s.hole_type {
        classes.insert(c.clone());
    }
    let mut int_ops: Vec<BinOp> = ARITHMETIC.to_vec();
    let mut cmp_ops: Vec<BinOp> = COMPARISONS.to_vec();
    for op in ops {
        let set = if op.is_comparison() {
            &mut cmp_ops
        } else if op.is_logical() {
            continue;
        } else {
            &mut int_ops
        };
        if !set.contains(&op) {
            set.push(op);
        }
    }
    Scope {
        p,
        reference: &s.reference,
        env,
        vars,
        consts,
        classes,
        excluded: p.callers_closure(&s.func),
        int_ops,
        cmp_ops,
        neg,
    }
}

fn has_neg(e: &Expr) -> bool {
    match e {
        Expr::Unary(UnOp::Neg, _) => true,
        Expr::Unary(_, x) => has_neg(x),
        Expr::Binary(_, a, b) => has_neg(a) || has_neg(b),
        Expr::Call(c) => c.args.iter().any(has_neg),
        _ => false,
    }
}

/// Productions for calls returning `t` into `lhs`.
fn call_rules(b: &mut Builder, sc: &Scope, lhs: NtId, t: &Type) {
    for (sig, is_static, params) in sc.callables(t) {
        let args: Vec<NtId> = params.iter().map(|x| b.nt(&ty_key(x))).collect();
        let target = if is_static {
            CallShape::Static(sig.class.clone())
        } else {
            CallShape::Virtual(b.nt(&ty_key(&Type::Class(sig.class.clone()))))
        };
        b.rule(lhs, Rhs::Call { target, func: sig.name.clone(), args });
    }
}

fn leaf_rules(b: &mut Builder, sc: &Scope, lhs: NtId, t: &Type) {
    match t {
        Type::Bool => {
            b.rule(lhs, Rhs::Leaf(Expr::boolean(true)));
            b.rule(lhs, Rhs::Leaf(Expr::boolean(false)));
        }
        Type::Int => {
            for c in &sc.consts {
                b.rule(lhs, Rhs::Leaf(Expr::int(*c)));
            }
        }
        Type::Class(_) => {}
    }
    for v in sc.vars_of(t) {
        b.rule(lhs, Rhs::Leaf(Expr::var(v)));
    }
    for f in sc.fields_of(t) {
        b.rule(lhs, Rhs::Leaf(f));
    }
    if let Type::Class(_) = t {
        b.rule(lhs, Rhs::Leaf(Expr::Const(Const::Null)));
    }
}

/// Boolean productions; `negate` adds `!NBool`.
fn bool_rules(b: &mut Builder, sc: &Scope, lhs: NtId, negate: bool) {
    let bool_nt = b.nt("Bool");
    let nbool = b.nt("NBool");
    let int_nt = b.nt("Int");
    leaf_rules(b, sc, lhs, &Type::Bool);
    if negate {
        b.rule(lhs, Rhs::Unary(UnOp::Not, nbool));
    }
    call_rules(b, sc, lhs, &Type::Bool);
    for op in &sc.cmp_ops {
        b.rule(lhs, Rhs::Binary(*op, int_nt, int_nt));
    }
    for op in [BinOp::Eq, BinOp::Ne] {
        b.rule(lhs, Rhs::Binary(op, bool_nt, bool_nt));
    }
    for c in &sc.classes {
        let o = b.nt(&ty_key(&Type::Class(c.clone())));
        for op in [BinOp::Eq, BinOp::Ne] {
            b.rule(lhs, Rhs::Binary(op, o, o));
        }
    }
    b.rule(lhs, Rhs::Binary(BinOp::And, bool_nt, bool_nt));
    b.rule(lhs, Rhs::Binary(BinOp::Or, bool_nt, bool_nt));
}

/// Typed expression non-terminals. Jump conditions get comparisons and
/// logical operators only; integer arithmetic is added for value holes.
fn expression_rules(b: &mut Builder, sc: &Scope, arithmetic: bool) {
    let bool_nt = b.nt("Bool");
    let nbool = b.nt("NBool");
    bool_rules(b, sc, bool_nt, true);
    bool_rules(b, sc, nbool, false);
    let int_nt = b.nt("Int");
    leaf_rules(b, sc, int_nt, &Type::Int);
    call_rules(b, sc, int_nt, &Type::Int);
    if arithmetic {
        if sc.neg {
            b.rule(int_nt, Rhs::Unary(UnOp::Neg, int_nt));
        }
        for op in &sc.int_ops {
            b.rule(int_nt, Rhs::Binary(*op, int_nt, int_nt));
        }
    }
    for c in &sc.classes {
        let t = Type::Class(c.clone());
        let o = b.nt(&ty_key(&t));
        leaf_rules(b, sc, o, &t);
        call_rules(b, sc, o, &t);
    }
}

/// Immediates of type `t`: constants and variables.
fn immediate_rules(b: &mut Builder, sc: &Scope, lhs: NtId, t: &Type, with_null: bool) {
    match t {
        Type::Bool => {
            b.rule(lhs, Rhs::Leaf(Expr::boolean(true)));
            b.rule(lhs, Rhs::Leaf(Expr::boolean(false)));
        }
        Type::Int => {
            for c in &sc.consts {
                b.rule(lhs, Rhs::Leaf(Expr::int(*c)));
            }
        }
        Type::Class(_) => {}
    }
    for v in sc.vars_of(t) {
        b.rule(lhs, Rhs::Leaf(Expr::var(v)));
    }
    if with_null && matches!(t, Type::Class(_)) {
        b.rule(lhs, Rhs::Leaf(Expr::Const(Const::Null)));
    }
}

/// Grammar of fills for the hole of `s`, start symbol first.
pub fn generate_grammar(s: &Sketch) -> Grammar {
    let sc = scope_of(s);
    let mut b = Builder { names: Vec::new(), index: HashMap::new(), rules: Vec::new() };
    let start = match s.kind {
        HoleKind::JumpCond => {
            let start = b.nt("Bool");
            expression_rules(&mut b, &sc, false);
            start
        }
        HoleKind::AssignRhs => {
            let start = b.nt(&ty_key(&s.hole_type));
            expression_rules(&mut b, &sc, true);
            start
        }
        HoleKind::ReturnValue => {
            let start = b.nt("Ret");
            immediate_rules(&mut b, &sc, start, &s.hole_type, true);
            start
        }
        HoleKind::CallExpr => {
            let start = b.nt("Call");
            for (sig, is_static, params) in sc.callables(&s.hole_type) {
                let mut args = Vec::new();
                for t in &params {
                    let nt = b.nt(&format!("Imm<{}>", ty_key(t)));
                    args.push(nt);
                }
                let target = if is_static {
                    CallShape::Static(sig.class.clone())
                } else {
                    CallShape::Virtual(b.nt(&format!("Recv<{}>", sig.class)))
                };
                b.rule(start, Rhs::Call { target, func: sig.name.clone(), args });
            }
            let imm_types: Vec<(NtId, Type, bool)> = b
                .names
                .clone()
                .iter()
                .enumerate()
                .filter_map(|(i, n)| {
                    let t = n.strip_prefix("Imm<")?.strip_suffix('>')?;
                    Some((i, key_ty(t), true))
                })
                .chain(b.names.clone().iter().enumerate().filter_map(|(i, n)| {
                    let c = n.strip_prefix("Recv<")?.strip_suffix('>')?;
                    Some((i, Type::Class(c.to_string()), false))
                }))
                .collect();
            for (nt, t, with_null) in imm_types {
                immediate_rules(&mut b, &sc, nt, &t, with_null);
            }
            start
        }
    };
    Grammar::new(b.names, start, b.rules)
}

fn key_ty(k: &str) -> Type {
    match k {
        "Int" => Type::Int,
        "Bool" => Type::Bool,
        _ => Type::Class(k.trim_start_matches("Obj<").trim_end_matches('>').to_string()),
    }
}
