//! Canonical text form. `parse_program(&p.to_string())` yields `p` again.

use std::fmt::{self, Write as _};

use super::*;

/// Expression paired with the string table used to print literals.
pub struct ExprDisplay<'a> {
    pub expr: &'a Expr,
    pub strings: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self.expr, self.strings);
        f.write_str(&s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ExprDisplay { expr: self, strings: &[] }.fmt(f)
    }
}

fn write_const(out: &mut String, c: Const, strings: &[String]) {
    match c {
        Const::Int(v) => write!(out, "{v}").unwrap(),
        Const::Bool(b) => write!(out, "{b}").unwrap(),
        Const::Null => out.push_str("null"),
        Const::Str(id) => match strings.get(id as usize) {
            Some(s) => write!(out, "{s:?}").unwrap(),
            None => write!(out, "\"#{id}\"").unwrap(),
        },
    }
}

fn write_imm(out: &mut String, i: &Immediate, strings: &[String]) {
    match i {
        Immediate::Var(v) => out.push_str(v),
        Immediate::Const(c) => write_const(out, *c, strings),
    }
}

fn write_lvalue(out: &mut String, lv: &LValue, strings: &[String]) {
    match lv {
        LValue::Var(v) => out.push_str(v),
        LValue::Field(b, a) => write!(out, "{b}.{a}").unwrap(),
        LValue::Index(b, i) => {
            write!(out, "{b}[").unwrap();
            write_imm(out, i, strings);
            out.push(']');
        }
    }
}

fn needs_parens(child: &Expr, parent_prec: u8, right: bool) -> bool {
    match child {
        Expr::Binary(op, ..) => op.precedence() < parent_prec || (right && op.precedence() == parent_prec),
        _ => false,
    }
}

fn write_expr(out: &mut String, e: &Expr, strings: &[String]) {
    match e {
        Expr::LValue(lv) => write_lvalue(out, lv, strings),
        Expr::Const(c) => write_const(out, *c, strings),
        Expr::Unary(op, x) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            let paren = matches!(x.as_ref(), Expr::Binary(..))
                || (matches!(op, UnOp::Neg) && matches!(x.as_ref(), Expr::Const(Const::Int(_))));
            if paren {
                out.push('(');
            }
            write_expr(out, x, strings);
            if paren {
                out.push(')');
            }
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            for (i, side) in [a, b].into_iter().enumerate() {
                if i == 1 {
                    write!(out, " {} ", op.symbol()).unwrap();
                }
                let paren = needs_parens(side, p, i == 1);
                if paren {
                    out.push('(');
                }
                write_expr(out, side, strings);
                if paren {
                    out.push(')');
                }
            }
        }
        Expr::Call(c) => {
            match &c.target {
                CallTarget::Static(class) => out.push_str(class),
                CallTarget::Virtual(r) => {
                    let paren = !matches!(r.as_ref(), Expr::LValue(_) | Expr::Call(_));
                    if paren {
                        out.push('(');
                    }
                    write_expr(out, r, strings);
                    if paren {
                        out.push(')');
                    }
                }
            }
            write!(out, ".{}(", c.func).unwrap();
            for (i, a) in c.args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, strings);
            }
            out.push(')');
        }
    }
}

/// Statement text without its line label.
pub fn statement_text(s: &Statement, strings: &[String]) -> String {
    let mut out = String::new();
    let args = |out: &mut String, args: &[Immediate]| {
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_imm(out, a, strings);
        }
    };
    match s {
        Statement::Assign(lv, e) => {
            write_lvalue(&mut out, lv, strings);
            out.push_str(" = ");
            write_expr(&mut out, e, strings);
        }
        Statement::Jump(e, t) => {
            out.push_str("if (");
            write_expr(&mut out, e, strings);
            write!(out, ") goto {t}").unwrap();
        }
        Statement::Return(i) => {
            out.push_str("return ");
            write_imm(&mut out, i, strings);
        }
        Statement::New(x, c) => write!(out, "{x} = new {c}").unwrap(),
        Statement::SCall { dst, class, func, args: a } => {
            write!(out, "{dst} = {class}.{func}(").unwrap();
            args(&mut out, a);
            out.push(')');
        }
        Statement::VCall { dst, receiver, func, args: a } => {
            write!(out, "{dst} = {receiver}.{func}(").unwrap();
            args(&mut out, a);
            out.push(')');
        }
        Statement::Trap => out.push_str("trap"),
    }
    out
}

fn opt_ty(ty: &Option<Type>) -> String {
    ty.as_ref().map(|t| format!(": {t}")).unwrap_or_default()
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ci, c) in self.classes.iter().enumerate() {
            if ci > 0 {
                writeln!(f)?;
            }
            write!(f, "class {}", c.name)?;
            if c.is_network {
                write!(f, " @network")?;
            }
            writeln!(f, " {{")?;
            if !c.fields.is_empty() {
                let fields: Vec<String> = c.fields.iter().map(|x| format!("{}{}", x.name, opt_ty(&x.ty))).collect();
                writeln!(f, "  fields: {};", fields.join(", "))?;
            }
            for func in &c.functions {
                if func.body.is_empty() {
                    // Synthesized model stubs have no text form.
                    continue;
                }
                let params: Vec<String> = func.params.iter().map(|p| format!("{}{}", p.name, opt_ty(&p.ty))).collect();
                writeln!(
                    f,
                    "  {}func {}({}){} {{",
                    if func.is_static { "static " } else { "" },
                    func.name,
                    params.join(", "),
                    opt_ty(&func.ret_ty)
                )?;
                for (l, s) in &func.body {
                    writeln!(f, "    {l}: {}", statement_text(s, &self.strings))?;
                }
                writeln!(f, "  }}")?;
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}
