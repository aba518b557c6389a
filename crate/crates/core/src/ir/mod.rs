//! The object language: classes, functions, and line-numbered
//! three-address statements.
//!
//! A [`Program`] is immutable once validated. Every statement carries a
//! globally unique [`LineId`]; line numbers are consecutive inside a
//! function body and jumps never leave their function.

mod parse;
mod print;
mod query;
pub mod types;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_program, ParseError};
pub use print::{statement_text, ExprDisplay};
pub use query::QueryError;

use crate::abstraction::ModelTemplate;

/// Base value of interned string literals. Literal `i` evaluates to
/// `STRING_BASE + i`.
pub const STRING_BASE: i64 = 0x5354_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineId(pub u32);

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Class name + function name + arity (receiver excluded).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FuncSig {
    pub class: String,
    pub name: String,
    pub arity: usize,
}

impl FuncSig {
    pub fn new(class: impl Into<String>, name: impl Into<String>, arity: usize) -> Self {
        FuncSig { class: class.into(), name: name.into(), arity }
    }
}

impl fmt::Display for FuncSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}/{}", self.class, self.name, self.arity)
    }
}

/// Optional static type annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    Class(String),
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Bool => write!(f, "bool"),
            Type::Class(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
    /// Interned string literals, indexed by their id.
    pub strings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub is_network: bool,
    pub fields: Vec<FieldDecl>,
    pub functions: Vec<FunctionDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Option<Type>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Option<Type>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub is_static: bool,
    pub params: Vec<Param>,
    pub ret_ty: Option<Type>,
    pub body: Vec<(LineId, Statement)>,
    /// Set when the function has been replaced by an abstract model. The
    /// original body, if any, is kept for line bookkeeping only.
    pub model: Option<ModelTemplate>,
}

impl FunctionDecl {
    pub fn lines(&self) -> impl Iterator<Item = LineId> + '_ {
        self.body.iter().map(|(l, _)| *l)
    }

    pub fn is_abstracted(&self) -> bool {
        self.model.is_some()
    }

    /// Variable slots in order: `this` (instance functions), parameters,
    /// then locals in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut vars: Vec<String> = Vec::new();
        let push = |v: &str, vars: &mut Vec<String>| {
            if !vars.iter().any(|x| x == v) {
                vars.push(v.to_string());
            }
        };
        if !self.is_static {
            push("this", &mut vars);
        }
        for p in &self.params {
            push(&p.name, &mut vars);
        }
        for (_, s) in &self.body {
            s.visit_vars(&mut |v| push(v, &mut vars));
        }
        vars
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Const {
    Int(i64),
    Bool(bool),
    Null,
    Str(u32),
}

impl Const {
    pub fn value(self) -> i64 {
        match self {
            Const::Int(v) => v,
            Const::Bool(b) => b as i64,
            Const::Null => 0,
            Const::Str(id) => STRING_BASE + id as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Immediate {
    Var(String),
    Const(Const),
}

impl Immediate {
    pub fn to_expr(&self) -> Expr {
        match self {
            Immediate::Var(v) => Expr::LValue(LValue::Var(v.clone())),
            Immediate::Const(c) => Expr::Const(*c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(String),
    Field(String, String),
    Index(String, Immediate),
}

impl LValue {
    pub fn base(&self) -> &str {
        match self {
            LValue::Var(v) | LValue::Field(v, _) | LValue::Index(v, _) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    BitXor,
    BitAnd,
    BitOr,
    Shl,
    Shr,
    UShr,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::BitXor => "^",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::UShr => ">>>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::BitOr => 3,
            BinOp::BitXor => 4,
            BinOp::BitAnd => 5,
            BinOp::Eq | BinOp::Ne => 6,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
            BinOp::Shl | BinOp::Shr | BinOp::UShr => 8,
            BinOp::Add | BinOp::Sub => 9,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 10,
        }
    }

    pub fn is_bitwise(self) -> bool {
        matches!(self, BinOp::BitXor | BinOp::BitAnd | BinOp::BitOr | BinOp::Shl | BinOp::Shr | BinOp::UShr)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub const ALL: [BinOp; 19] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
        BinOp::BitXor,
        BinOp::BitAnd,
        BinOp::BitOr,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::UShr,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CallTarget {
    Static(String),
    Virtual(Box<Expr>),
}

/// A call appearing inside an expression. Its heap effects are discarded:
/// only the returned value is observable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CallExpr {
    pub target: CallTarget,
    pub func: String,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    LValue(LValue),
    Const(Const),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(CallExpr),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::LValue(LValue::Var(name.to_string()))
    }

    pub fn field(base: &str, field: &str) -> Expr {
        Expr::LValue(LValue::Field(base.to_string(), field.to_string()))
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Const::Int(v))
    }

    pub fn boolean(b: bool) -> Expr {
        Expr::Const(Const::Bool(b))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn as_immediate(&self) -> Option<Immediate> {
        match self {
            Expr::LValue(LValue::Var(v)) => Some(Immediate::Var(v.clone())),
            Expr::Const(c) => Some(Immediate::Const(*c)),
            _ => None,
        }
    }

    pub fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Expr::LValue(lv) => lvalue_vars(lv, f),
            Expr::Const(_) => {}
            Expr::Unary(_, e) => e.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Call(c) => {
                if let CallTarget::Virtual(r) = &c.target {
                    r.visit_vars(f);
                }
                for a in &c.args {
                    a.visit_vars(f);
                }
            }
        }
    }

    pub fn visit_consts(&self, f: &mut dyn FnMut(Const)) {
        match self {
            Expr::LValue(LValue::Index(_, Immediate::Const(c))) | Expr::Const(c) => f(*c),
            Expr::LValue(_) => {}
            Expr::Unary(_, e) => e.visit_consts(f),
            Expr::Binary(_, a, b) => {
                a.visit_consts(f);
                b.visit_consts(f);
            }
            Expr::Call(c) => {
                if let CallTarget::Virtual(r) = &c.target {
                    r.visit_consts(f);
                }
                for a in &c.args {
                    a.visit_consts(f);
                }
            }
        }
    }

    pub fn visit_ops(&self, f: &mut dyn FnMut(BinOp)) {
        match self {
            Expr::LValue(_) | Expr::Const(_) => {}
            Expr::Unary(_, e) => e.visit_ops(f),
            Expr::Binary(op, a, b) => {
                f(*op);
                a.visit_ops(f);
                b.visit_ops(f);
            }
            Expr::Call(c) => {
                if let CallTarget::Virtual(r) = &c.target {
                    r.visit_ops(f);
                }
                for a in &c.args {
                    a.visit_ops(f);
                }
            }
        }
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::LValue(_) | Expr::Const(_) => 1,
            Expr::Unary(_, e) => 1 + e.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
            Expr::Call(c) => {
                let r = match &c.target {
                    CallTarget::Virtual(r) => r.size(),
                    CallTarget::Static(_) => 0,
                };
                1 + r + c.args.iter().map(Expr::size).sum::<usize>()
            }
        }
    }
}

fn lvalue_vars(lv: &LValue, f: &mut dyn FnMut(&str)) {
    match lv {
        LValue::Var(v) | LValue::Field(v, _) => f(v),
        LValue::Index(v, i) => {
            f(v);
            if let Immediate::Var(x) = i {
                f(x);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Assign(LValue, Expr),
    Jump(Expr, LineId),
    Return(Immediate),
    New(String, String),
    SCall {
        dst: String,
        class: String,
        func: String,
        args: Vec<Immediate>,
    },
    VCall {
        dst: String,
        receiver: String,
        func: String,
        args: Vec<Immediate>,
    },
    /// Unreachable marker produced by bounded unrolling.
    Trap,
}

impl Statement {
    pub fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        let imm = |i: &Immediate, f: &mut dyn FnMut(&str)| {
            if let Immediate::Var(v) = i {
                f(v)
            }
        };
        match self {
            Statement::Assign(lv, e) => {
                lvalue_vars(lv, f);
                e.visit_vars(f);
            }
            Statement::Jump(e, _) => e.visit_vars(f),
            Statement::Return(i) => imm(i, f),
            Statement::New(x, _) => f(x),
            Statement::SCall { dst, args, .. } => {
                f(dst);
                for a in args {
                    imm(a, f);
                }
            }
            Statement::VCall { dst, receiver, args, .. } => {
                f(dst);
                f(receiver);
                for a in args {
                    imm(a, f);
                }
            }
            Statement::Trap => {}
        }
    }

    pub fn is_call(&self) -> bool {
        matches!(self, Statement::SCall { .. } | Statement::VCall { .. })
    }

    /// Expressions read by the statement (right-hand sides, conditions,
    /// call arguments).
    pub fn exprs(&self) -> Vec<Expr> {
        match self {
            Statement::Assign(_, e) | Statement::Jump(e, _) => vec![e.clone()],
            Statement::Return(i) => vec![i.to_expr()],
            Statement::SCall { args, .. } => args.iter().map(Immediate::to_expr).collect(),
            Statement::VCall { receiver, args, .. } => {
                std::iter::once(Expr::var(receiver)).chain(args.iter().map(Immediate::to_expr)).collect()
            }
            Statement::New(..) | Statement::Trap => vec![],
        }
    }
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Class identity used for dynamic types: declaration index + 1.
    pub fn class_id(&self, name: &str) -> Option<i64> {
        self.classes.iter().position(|c| c.name == name).map(|i| i as i64 + 1)
    }

    pub fn function(&self, sig: &FuncSig) -> Option<&FunctionDecl> {
        self.class(&sig.class)?.functions.iter().find(|f| f.name == sig.name && f.params.len() == sig.arity)
    }

    pub fn function_mut(&mut self, sig: &FuncSig) -> Option<&mut FunctionDecl> {
        self.classes
            .iter_mut()
            .find(|c| c.name == sig.class)?
            .functions
            .iter_mut()
            .find(|f| f.name == sig.name && f.params.len() == sig.arity)
    }

    pub fn signatures(&self) -> Vec<FuncSig> {
        self.classes
            .iter()
            .flat_map(|c| c.functions.iter().map(move |f| FuncSig::new(&c.name, &f.name, f.params.len())))
            .collect()
    }

    pub fn all_lines(&self) -> Vec<LineId> {
        self.classes.iter().flat_map(|c| c.functions.iter()).flat_map(|f| f.lines()).collect()
    }

    /// Field offset inside objects of `class`.
    pub fn field_offset(&self, class: &str, field: &str) -> Option<i64> {
        self.class(class)?.fields.iter().position(|f| f.name == field).map(|i| i as i64)
    }

    /// Object size in heap cells; empty classes still take one cell so
    /// that distinct objects get distinct addresses.
    pub fn object_size(&self, class: &str) -> Option<i64> {
        self.class(class).map(|c| c.fields.len().max(1) as i64)
    }

    /// Offset of `field` when the receiver class is unknown: the offset is
    /// taken from the first class declaring it.
    pub fn any_field_offset(&self, field: &str) -> Option<i64> {
        self.classes.iter().find_map(|c| c.fields.iter().position(|f| f.name == field)).map(|i| i as i64)
    }

    /// Index of lines: line → (function signature, statement index).
    pub fn line_index(&self) -> BTreeMap<LineId, (FuncSig, usize)> {
        let mut out = BTreeMap::new();
        for c in &self.classes {
            for f in &c.functions {
                let sig = FuncSig::new(&c.name, &f.name, f.params.len());
                for (i, (l, _)) in f.body.iter().enumerate() {
                    out.insert(*l, (sig.clone(), i));
                }
            }
        }
        out
    }

    pub fn statement(&self, line: LineId) -> Option<&Statement> {
        self.classes
            .iter()
            .flat_map(|c| c.functions.iter())
            .flat_map(|f| f.body.iter())
            .find(|(l, _)| *l == line)
            .map(|(_, s)| s)
    }

    pub fn function_of_line(&self, line: LineId) -> Option<FuncSig> {
        for c in &self.classes {
            for f in &c.functions {
                if f.body.iter().any(|(l, _)| *l == line) {
                    return Some(FuncSig::new(&c.name, &f.name, f.params.len()));
                }
            }
        }
        None
    }

    /// Returns a copy with the statement at `line` replaced.
    pub fn with_statement(&self, line: LineId, stmt: Statement) -> Program {
        let mut p = self.clone();
        for c in &mut p.classes {
            for f in &mut c.functions {
                for (l, s) in &mut f.body {
                    if *l == line {
                        *s = stmt.clone();
                    }
                }
            }
        }
        p
    }

    /// Static functions with the given name in `class` (any arity).
    pub fn resolve_entry(&self, class: &str, name: &str, arity: Option<usize>) -> Option<FuncSig> {
        let c = self.class(class)?;
        c.functions
            .iter()
            .filter(|f| f.name == name && arity.is_none_or(|a| a == f.params.len()))
            .map(|f| FuncSig::new(class, name, f.params.len()))
            .next()
    }
}
