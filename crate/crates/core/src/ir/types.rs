//! Best-effort static types from annotations and assignments.

use std::collections::BTreeMap;

use super::*;

pub type TypeEnv = BTreeMap<String, Type>;

pub fn field_type(p: &Program, class: &str, field: &str) -> Option<Type> {
    p.class(class)?.fields.iter().find(|f| f.name == field)?.ty.clone()
}

fn call_ret_type(p: &Program, target_class: Option<&str>, func: &str, arity: usize) -> Option<Type> {
    match target_class {
        Some(c) => p.function(&FuncSig::new(c, func, arity)).and_then(|f| f.ret_ty.clone()),
        None => p.virtual_candidates(func, arity).iter().find_map(|s| p.function(s).and_then(|f| f.ret_ty.clone())),
    }
}

pub fn expr_type(p: &Program, env: &TypeEnv, e: &Expr) -> Option<Type> {
    match e {
        Expr::Const(Const::Bool(_)) => Some(Type::Bool),
        Expr::Const(Const::Int(_)) | Expr::Const(Const::Str(_)) => Some(Type::Int),
        Expr::Const(Const::Null) => None,
        Expr::LValue(LValue::Var(v)) => env.get(v).cloned(),
        Expr::LValue(LValue::Field(b, a)) => match env.get(b) {
            Some(Type::Class(c)) => field_type(p, c, a),
            _ => None,
        },
        Expr::LValue(LValue::Index(..)) => Some(Type::Int),
        Expr::Unary(UnOp::Not, _) => Some(Type::Bool),
        Expr::Unary(UnOp::Neg, _) => Some(Type::Int),
        Expr::Binary(op, ..) if op.is_comparison() || op.is_logical() => Some(Type::Bool),
        Expr::Binary(..) => Some(Type::Int),
        Expr::Call(c) => match &c.target {
            CallTarget::Static(class) => call_ret_type(p, Some(class), &c.func, c.args.len()),
            CallTarget::Virtual(r) => match expr_type(p, env, r) {
                Some(Type::Class(cls)) => call_ret_type(p, Some(&cls), &c.func, c.args.len()),
                _ => call_ret_type(p, None, &c.func, c.args.len()),
            },
        },
    }
}

/// Types of the variables of `func` declared in `class`.
pub fn infer_var_types(p: &Program, class: &str, func: &FunctionDecl) -> TypeEnv {
    let mut env = TypeEnv::new();
    if !func.is_static {
        env.insert("this".into(), Type::Class(class.to_string()));
    }
    for prm in &func.params {
        if let Some(t) = &prm.ty {
            env.insert(prm.name.clone(), t.clone());
        }
    }
    loop {
        let mut changed = false;
        for (_, s) in &func.body {
            let (dst, ty) = match s {
                Statement::New(x, c) => (x, Some(Type::Class(c.clone()))),
                Statement::Assign(LValue::Var(x), e) => (x, expr_type(p, &env, e)),
                Statement::SCall { dst, class, func, args } => (dst, call_ret_type(p, Some(class), func, args.len())),
                Statement::VCall { dst, receiver, func, args } => {
                    let recv = match env.get(receiver) {
                        Some(Type::Class(c)) => Some(c.clone()),
                        _ => None,
                    };
                    (dst, call_ret_type(p, recv.as_deref(), func, args.len()))
                }
                _ => continue,
            };
            if let Some(t) = ty {
                if !env.contains_key(dst) {
                    env.insert(dst.clone(), t);
                    changed = true;
                }
            }
        }
        if !changed {
            return env;
        }
    }
}
