//! Parser and validator for `.np` program text.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use super::*;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate line number {0}")]
    DuplicateLine(LineId),
    #[error("non-consecutive line numbers in {func}: {prev} followed by {next}")]
    NonConsecutive { func: String, prev: LineId, next: LineId },
    #[error("jump at line {line} targets {target}, outside of {func}")]
    JumpOutside { func: String, line: LineId, target: LineId },
    #[error("duplicate function signature {0}")]
    DuplicateFunction(String),
    #[error("duplicate field {field} in class {class}")]
    DuplicateField { class: String, field: String },
    #[error("duplicate class {0}")]
    DuplicateClass(String),
    #[error("function {0} has an empty body")]
    EmptyBody(String),
    #[error("unknown class {class} at line {line}")]
    UnknownClass { line: LineId, class: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: [&str; 31] = [
    ">>>", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "=", "+",
    "-", "*", "/", "%", "<", ">", "!", "^", "&", "|",
];

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (sl, sc) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| err(sl, sc, format!("integer out of range: {s}")))?;
            col += i - start;
            out.push(Token { tok: Tok::Int(v), line: sl, col: sc });
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '@' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            let s: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(s), line: sl, col: sc });
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(sl, sc, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = chars.get(i + 1).copied().unwrap_or('\\');
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            o => o,
                        });
                        i += 2;
                        col += 2;
                    }
                    Some(&o) => {
                        s.push(o);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: sl, col: sc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push(Token { tok: Tok::Punct(p), line: sl, col: sc });
            }
            None => return Err(err(sl, sc, format!("unexpected character {c:?}"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    strings: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {:?}", self.peek()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !s.starts_with('@') => {
                self.bump();
                Ok(s)
            }
            t => self.error(format!("expected identifier, found {t:?}")),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            ref t => self.error(format!("expected integer, found {t:?}")),
        }
    }

    fn line_id(&mut self) -> PResult<LineId> {
        let v = self.int()?;
        u32::try_from(v).map(LineId).or_else(|_| self.error("line number out of range"))
    }

    fn ty(&mut self) -> PResult<Type> {
        let s = self.ident()?;
        Ok(match s.as_str() {
            "int" | "long" => Type::Int,
            "bool" | "boolean" => Type::Bool,
            _ => Type::Class(s),
        })
    }

    fn program(&mut self) -> PResult<Vec<ClassDecl>> {
        let mut classes = Vec::new();
        while *self.peek() != Tok::Eof {
            classes.push(self.class()?);
        }
        Ok(classes)
    }

    fn class(&mut self) -> PResult<ClassDecl> {
        let mut is_network = false;
        if self.is_kw("@network") {
            self.bump();
            is_network = true;
        }
        self.expect_kw("class")?;
        let name = self.ident()?;
        if self.is_kw("@network") {
            self.bump();
            is_network = true;
        }
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut functions = Vec::new();
        while !self.is_punct("}") {
            if self.is_kw("fields") {
                self.bump();
                self.expect_punct(":")?;
                loop {
                    let fname = self.ident()?;
                    let ty = if self.is_punct(":") {
                        self.bump();
                        Some(self.ty()?)
                    } else {
                        None
                    };
                    fields.push(FieldDecl { name: fname, ty });
                    if self.is_punct(",") {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect_punct(";")?;
            } else if self.is_kw("static") || self.is_kw("func") {
                functions.push(self.function()?);
            } else {
                return self.error(format!("expected `fields`, `func` or `}}`, found {:?}", self.peek()));
            }
        }
        self.expect_punct("}")?;
        Ok(ClassDecl { name, is_network, fields, functions })
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let is_static = if self.is_kw("static") {
            self.bump();
            true
        } else {
            false
        };
        self.expect_kw("func")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pname = self.ident()?;
                let ty = if self.is_punct(":") {
                    self.bump();
                    Some(self.ty()?)
                } else {
                    None
                };
                params.push(Param { name: pname, ty });
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let ret_ty = if self.is_punct(":") {
            self.bump();
            Some(self.ty()?)
        } else {
            None
        };
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            let l = self.line_id()?;
            self.expect_punct(":")?;
            body.push((l, self.statement()?));
        }
        self.expect_punct("}")?;
        Ok(FunctionDecl { name, is_static, params, ret_ty, body, model: None })
    }

    fn statement(&mut self) -> PResult<Statement> {
        if self.is_kw("if") {
            self.bump();
            self.expect_punct("(")?;
            let e = self.expr()?;
            self.expect_punct(")")?;
            self.expect_kw("goto")?;
            let t = self.line_id()?;
            return Ok(Statement::Jump(e, t));
        }
        if self.is_kw("return") {
            self.bump();
            let e = self.expr()?;
            return match e.as_immediate() {
                Some(i) => Ok(Statement::Return(i)),
                None => self.error("return takes a variable or a constant"),
            };
        }
        if self.is_kw("trap") {
            self.bump();
            return Ok(Statement::Trap);
        }
        let lv = self.lvalue()?;
        self.expect_punct("=")?;
        if self.is_kw("new") {
            self.bump();
            let class = self.ident()?;
            return match lv {
                LValue::Var(x) => Ok(Statement::New(x, class)),
                _ => self.error("`new` must be assigned to a variable"),
            };
        }
        let e = self.expr()?;
        Ok(Statement::Assign(lv, e))
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let base = self.ident()?;
        if self.is_punct(".") {
            self.bump();
            let f = self.ident()?;
            return Ok(LValue::Field(base, f));
        }
        if self.is_punct("[") {
            self.bump();
            let e = self.expr()?;
            self.expect_punct("]")?;
            return match e.as_immediate() {
                Some(i) => Ok(LValue::Index(base, i)),
                None => self.error("array index must be a variable or a constant"),
            };
        }
        Ok(LValue::Var(base))
    }

    fn binop(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Punct(p) => BinOp::ALL.iter().copied().find(|op| op.symbol() == *p),
            _ => None,
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.expr_prec(1)
    }

    fn expr_prec(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min {
                break;
            }
            self.bump();
            let rhs = self.expr_prec(op.precedence() + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_punct("!") {
            self.bump();
            return Ok(Expr::not(self.unary()?));
        }
        if self.is_punct("-") {
            self.bump();
            // `-5` is a literal, `-(5)` a negation
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                return Ok(Expr::int(v.wrapping_neg()));
            }
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.is_punct(".") {
                self.bump();
                let name = self.ident()?;
                if self.is_punct("(") {
                    let args = self.args()?;
                    e = Expr::Call(CallExpr { target: CallTarget::Virtual(Box::new(e)), func: name, args });
                } else {
                    e = match e {
                        Expr::LValue(LValue::Var(b)) => Expr::LValue(LValue::Field(b, name)),
                        _ => return self.error("field access is only allowed on a variable"),
                    };
                }
            } else if self.is_punct("[") {
                self.bump();
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = match (e, idx.as_immediate()) {
                    (Expr::LValue(LValue::Var(b)), Some(i)) => Expr::LValue(LValue::Index(b, i)),
                    _ => return self.error("array access needs a variable base and an immediate index"),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Const(Const::Int(v)))
            }
            Tok::Str(s) => {
                self.bump();
                let id = match self.strings.iter().position(|x| *x == s) {
                    Some(i) => i,
                    None => {
                        self.strings.push(s);
                        self.strings.len() - 1
                    }
                };
                Ok(Expr::Const(Const::Str(id as u32)))
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::boolean(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::boolean(false))
                }
                "null" => {
                    self.bump();
                    Ok(Expr::Const(Const::Null))
                }
                _ => {
                    let name = self.ident()?;
                    Ok(Expr::var(&name))
                }
            },
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            t => self.error(format!("expected expression, found {t:?}")),
        }
    }
}

/// Turns `Virtual(Var(C))` into `Static(C)` when `C` names a class, then
/// lowers top-level immediate-argument calls into call statements.
fn resolve_calls(classes: &mut [ClassDecl]) {
    let names: HashSet<String> = classes.iter().map(|c| c.name.clone()).collect();
    for c in classes.iter_mut() {
        for f in c.functions.iter_mut() {
            for (_, s) in f.body.iter_mut() {
                match s {
                    Statement::Assign(_, e) | Statement::Jump(e, _) => resolve_expr(e, &names),
                    _ => {}
                }
                if let Statement::Assign(LValue::Var(dst), Expr::Call(call)) = s {
                    let args: Option<Vec<Immediate>> = call.args.iter().map(Expr::as_immediate).collect();
                    if let Some(args) = args {
                        let lowered = match &call.target {
                            CallTarget::Static(class) => Some(Statement::SCall {
                                dst: dst.clone(),
                                class: class.clone(),
                                func: call.func.clone(),
                                args,
                            }),
                            CallTarget::Virtual(r) => match r.as_ref() {
                                Expr::LValue(LValue::Var(recv)) => Some(Statement::VCall {
                                    dst: dst.clone(),
                                    receiver: recv.clone(),
                                    func: call.func.clone(),
                                    args,
                                }),
                                _ => None,
                            },
                        };
                        if let Some(l) = lowered {
                            *s = l;
                        }
                    }
                }
            }
        }
    }
}

fn resolve_expr(e: &mut Expr, classes: &HashSet<String>) {
    match e {
        Expr::LValue(_) | Expr::Const(_) => {}
        Expr::Unary(_, x) => resolve_expr(x, classes),
        Expr::Binary(_, a, b) => {
            resolve_expr(a, classes);
            resolve_expr(b, classes);
        }
        Expr::Call(c) => {
            if let CallTarget::Virtual(r) = &mut c.target {
                if let Expr::LValue(LValue::Var(v)) = r.as_ref() {
                    if classes.contains(v) {
                        c.target = CallTarget::Static(v.clone());
                    }
                } else {
                    resolve_expr(r, classes);
                }
            }
            for a in c.args.iter_mut() {
                resolve_expr(a, classes);
            }
        }
    }
}

/// Checks the structural invariants of a program.
pub fn validate(p: &Program) -> Result<(), ParseError> {
    let mut seen_lines = BTreeSet::new();
    let mut seen_classes = HashSet::new();
    let mut sigs = HashSet::new();
    for c in &p.classes {
        if !seen_classes.insert(&c.name) {
            return Err(ParseError::DuplicateClass(c.name.clone()));
        }
        let mut fields = HashSet::new();
        for f in &c.fields {
            if !fields.insert(&f.name) {
                return Err(ParseError::DuplicateField { class: c.name.clone(), field: f.name.clone() });
            }
        }
        for f in &c.functions {
            let sig = FuncSig::new(&c.name, &f.name, f.params.len());
            if !sigs.insert(sig.clone()) {
                return Err(ParseError::DuplicateFunction(sig.to_string()));
            }
            if f.body.is_empty() && f.model.is_none() {
                return Err(ParseError::EmptyBody(sig.to_string()));
            }
            let lines: HashSet<LineId> = f.lines().collect();
            for w in f.body.windows(2) {
                if w[1].0 .0 != w[0].0 .0 + 1 {
                    return Err(ParseError::NonConsecutive { func: sig.to_string(), prev: w[0].0, next: w[1].0 });
                }
            }
            for (l, s) in &f.body {
                if !seen_lines.insert(*l) {
                    return Err(ParseError::DuplicateLine(*l));
                }
                match s {
                    Statement::Jump(_, t) if !lines.contains(t) => {
                        return Err(ParseError::JumpOutside { func: sig.to_string(), line: *l, target: *t });
                    }
                    Statement::New(_, class) if p.class(class).is_none() => {
                        return Err(ParseError::UnknownClass { line: *l, class: class.clone() });
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

/// Parses and validates program text.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, pos: 0, strings: Vec::new() };
    let mut classes = parser.program()?;
    resolve_calls(&mut classes);
    let program = Program { classes, strings: parser.strings };
    validate(&program)?;
    report_orphans(&program);
    Ok(program)
}

fn report_orphans(p: &Program) {
    let mut has_pred: HashMap<LineId, bool> = HashMap::new();
    for c in &p.classes {
        for f in &c.functions {
            for (i, (l, s)) in f.body.iter().enumerate() {
                has_pred.entry(*l).or_insert(i == 0);
                if let Statement::Jump(_, t) = s {
                    has_pred.insert(*t, true);
                }
                if !matches!(s, Statement::Return(_)) {
                    if let Some((n, _)) = f.body.get(i + 1) {
                        has_pred.insert(*n, true);
                    }
                }
            }
        }
    }
    for (l, ok) in has_pred {
        if !ok {
            log::debug!("line {l} has no control-flow predecessor");
        }
    }
}
