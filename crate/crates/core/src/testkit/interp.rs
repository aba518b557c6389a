//! Concrete bounded interpreter.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::abstraction::{ModelFault, ModelHeap};
use crate::ir::*;

use super::ExecBounds;

/// Heap cell holding the allocation pointer.
pub const HEAP_TOP: i64 = -1;

/// Why execution stopped without a return value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Halt {
    Stuck(String),
    Bound,
}

/// Cells and dynamic types. Unwritten cells read as 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heap {
    pub cells: BTreeMap<i64, i64>,
    pub dtype: BTreeMap<i64, i64>,
    partial: bool,
    misses: Cell<usize>,
}

impl Default for Heap {
    fn default() -> Self {
        Heap { cells: BTreeMap::from([(HEAP_TOP, 1)]), dtype: BTreeMap::new(), partial: false, misses: Cell::new(0) }
    }
}

impl Heap {
    /// A heap known only on the given cells. Reads elsewhere return 0 and
    /// are counted by [`Heap::misses`].
    pub fn partial(cells: BTreeMap<i64, i64>, dtype: BTreeMap<i64, i64>) -> Heap {
        Heap { cells, dtype, partial: true, misses: Cell::new(0) }
    }

    pub fn misses(&self) -> usize {
        self.misses.get()
    }

    pub fn read(&self, a: i64) -> i64 {
        match self.cells.get(&a) {
            Some(v) => *v,
            None => {
                if self.partial {
                    self.misses.set(self.misses.get() + 1);
                }
                0
            }
        }
    }

    pub fn write(&mut self, a: i64, v: i64) {
        self.cells.insert(a, v);
    }

    pub fn type_of(&self, a: i64) -> i64 {
        match self.dtype.get(&a) {
            Some(t) => *t,
            None => {
                if self.partial && a != 0 {
                    self.misses.set(self.misses.get() + 1);
                }
                0
            }
        }
    }
}

impl ModelHeap for Heap {
    fn load(&mut self, addr: i64) -> Result<i64, ModelFault> {
        Ok(self.read(addr))
    }

    fn store(&mut self, addr: i64, v: i64) {
        self.write(addr, v)
    }

    fn dtype(&mut self, addr: i64) -> Result<i64, ModelFault> {
        Ok(self.type_of(addr))
    }

    fn alloc(&mut self, p: &Program, class: &str) -> Result<i64, ModelFault> {
        let (id, size) = match (p.class_id(class), p.object_size(class)) {
            (Some(i), Some(s)) => (i, s),
            _ => return Err(ModelFault::UnknownClass(class.to_string())),
        };
        let a = self.read(HEAP_TOP);
        self.write(HEAP_TOP, a + size);
        for i in 0..size {
            self.write(a + i, 0);
        }
        self.dtype.insert(a, id);
        Ok(a)
    }
}

/// Machine state at the first arrival at an observed line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub vars: BTreeMap<String, i64>,
    pub heap: Heap,
}

/// Everything recorded while running one entry.
#[derive(Debug, Clone)]
pub struct Execution {
    pub result: Result<i64, Halt>,
    /// Lines executed at least once, all functions.
    pub lines: BTreeSet<LineId>,
    /// Functions with concrete bodies in first-invocation order.
    pub calls: Vec<FuncSig>,
    pub steps: usize,
    pub snapshot: Option<Snapshot>,
    /// Post-value of the observed line at its first execution: assigned
    /// value, jump condition or returned value.
    pub observed_value: Option<i64>,
}

pub struct Machine<'p> {
    p: &'p Program,
    bounds: ExecBounds,
    pub heap: Heap,
    steps: usize,
    active: HashMap<FuncSig, usize>,
    lines: BTreeSet<LineId>,
    calls: Vec<FuncSig>,
    observe: Option<LineId>,
    snapshot: Option<Snapshot>,
    observed_value: Option<i64>,
    class_names: Vec<String>,
}

fn stuck<T>(msg: impl Into<String>) -> Result<T, Halt> {
    Err(Halt::Stuck(msg.into()))
}

impl<'p> Machine<'p> {
    pub fn new(p: &'p Program, bounds: ExecBounds) -> Self {
        Machine {
            p,
            bounds,
            heap: Heap::default(),
            steps: 0,
            active: HashMap::new(),
            lines: BTreeSet::new(),
            calls: Vec::new(),
            observe: None,
            snapshot: None,
            observed_value: None,
            class_names: p.classes.iter().map(|c| c.name.clone()).collect(),
        }
    }

    /// Capture the state the first time `line` is about to execute.
    pub fn observe(mut self, line: LineId) -> Self {
        self.observe = Some(line);
        self
    }

    pub fn run(mut self, entry: &FuncSig, args: &[i64]) -> Execution {
        let result = self.call(entry, args);
        Execution {
            result,
            lines: self.lines,
            calls: self.calls,
            steps: self.steps,
            snapshot: self.snapshot,
            observed_value: self.observed_value,
        }
    }

    fn class_of(&self, addr: i64) -> Option<&str> {
        let id = self.heap.type_of(addr);
        if id <= 0 {
            return None;
        }
        self.class_names.get(id as usize - 1).map(String::as_str)
    }

    fn field_addr(&self, base: i64, field: &str) -> Result<i64, Halt> {
        if base == 0 {
            return stuck(format!("null dereference reading .{field}"));
        }
        let Some(class) = self.class_of(base) else {
            return stuck(format!("field .{field} of a non-object"));
        };
        match self.p.field_offset(class, field) {
            Some(off) => Ok(base + off),
            None => stuck(format!("class {class} has no field {field}")),
        }
    }

    pub fn call(&mut self, sig: &FuncSig, args: &[i64]) -> Result<i64, Halt> {
        let p = self.p;
        let Some(func) = p.function(sig) else {
            return stuck(format!("unknown function {sig}"));
        };
        if let Some(model) = &func.model {
            return model.eval(p, &sig.class, &mut self.heap, args).map_err(|e| Halt::Stuck(e.to_string()));
        }
        let depth = self.active.get(sig).copied().unwrap_or(0);
        if depth >= self.bounds.unroll_k {
            return Err(Halt::Bound);
        }
        if !self.calls.contains(sig) {
            self.calls.push(sig.clone());
        }
        *self.active.entry(sig.clone()).or_insert(0) += 1;
        let r = self.exec_body(func, args);
        *self.active.get_mut(sig).unwrap() -= 1;
        r
    }

    fn exec_body(&mut self, func: &FunctionDecl, args: &[i64]) -> Result<i64, Halt> {
        let mut vars: HashMap<String, i64> = HashMap::new();
        let names = func.params.iter().map(|p| p.name.as_str());
        let names: Vec<&str> =
            if func.is_static { names.collect() } else { std::iter::once("this").chain(names).collect() };
        if names.len() != args.len() {
            return stuck(format!("{} expects {} arguments, got {}", func.name, names.len(), args.len()));
        }
        for (n, v) in names.iter().zip(args) {
            vars.insert(n.to_string(), *v);
        }
        let Some(first) = func.body.first().map(|(l, _)| l.0) else {
            return stuck(format!("{} has no body", func.name));
        };
        let mut pc = 0usize;
        let mut back_edges = 0usize;
        loop {
            let Some((line, stmt)) = func.body.get(pc) else {
                return stuck(format!("{} ended without return", func.name));
            };
            self.steps += 1;
            if self.steps > self.bounds.step_limit {
                return Err(Halt::Bound);
            }
            let first_visit = self.lines.insert(*line);
            let observing = first_visit && self.observe == Some(*line);
            if observing {
                self.snapshot = Some(Snapshot {
                    vars: vars.iter().map(|(k, v)| (k.clone(), *v)).collect(),
                    heap: self.heap.clone(),
                });
            }
            let mut next = pc + 1;
            match stmt {
                Statement::Assign(lv, e) => {
                    let v = self.eval(&vars, e)?;
                    if observing {
                        self.observed_value = Some(v);
                    }
                    self.assign(&mut vars, lv, v)?;
                }
                Statement::Jump(e, target) => {
                    let c = self.eval(&vars, e)? != 0;
                    if observing {
                        self.observed_value = Some(c as i64);
                    }
                    if c {
                        if target.0 <= line.0 {
                            back_edges += 1;
                            if back_edges > self.bounds.unroll_k {
                                return Err(Halt::Bound);
                            }
                        }
                        next = (target.0 - first) as usize;
                    }
                }
                Statement::Return(i) => {
                    let v = self.eval(&vars, &i.to_expr())?;
                    if observing {
                        self.observed_value = Some(v);
                    }
                    return Ok(v);
                }
                Statement::New(x, c) => {
                    let a = self.heap.alloc(self.p, c).map_err(|e| Halt::Stuck(e.to_string()))?;
                    vars.insert(x.clone(), a);
                }
                Statement::SCall { dst, class, func: f, args } => {
                    let vals: Vec<i64> = args.iter().map(|a| imm_value(&vars, a)).collect();
                    let v = self.static_call(class, f, &vals)?;
                    vars.insert(dst.clone(), v);
                }
                Statement::VCall { dst, receiver, func: f, args } => {
                    let r = vars.get(receiver).copied().unwrap_or(0);
                    let vals: Vec<i64> = args.iter().map(|a| imm_value(&vars, a)).collect();
                    let v = self.virtual_call(r, f, &vals)?;
                    vars.insert(dst.clone(), v);
                }
                Statement::Trap => return Err(Halt::Bound),
            }
            pc = next;
        }
    }

    fn static_call(&mut self, class: &str, f: &str, args: &[i64]) -> Result<i64, Halt> {
        let sig = FuncSig::new(class, f, args.len());
        match self.p.function(&sig) {
            Some(d) if d.is_static => self.call(&sig, args),
            Some(_) => stuck(format!("{sig} is not static")),
            None => stuck(format!("unknown function {sig}")),
        }
    }

    fn virtual_call(&mut self, recv: i64, f: &str, args: &[i64]) -> Result<i64, Halt> {
        if recv == 0 {
            return stuck(format!("null receiver calling {f}"));
        }
        let Some(class) = self.class_of(recv) else {
            return stuck(format!("call of {f} on a non-object"));
        };
        let sig = FuncSig::new(class, f, args.len());
        match self.p.function(&sig) {
            Some(d) if !d.is_static => {
                let full: Vec<i64> = std::iter::once(recv).chain(args.iter().copied()).collect();
                self.call(&sig, &full)
            }
            _ => stuck(format!("no method {f}/{} in {class}", args.len())),
        }
    }

    fn assign(&mut self, vars: &mut HashMap<String, i64>, lv: &LValue, v: i64) -> Result<(), Halt> {
        match lv {
            LValue::Var(x) => {
                vars.insert(x.clone(), v);
            }
            LValue::Field(b, a) => {
                let addr = self.field_addr(vars.get(b).copied().unwrap_or(0), a)?;
                self.heap.write(addr, v);
            }
            LValue::Index(b, i) => {
                let base = vars.get(b).copied().unwrap_or(0);
                if base == 0 {
                    return stuck("null array store");
                }
                self.heap.write(base.wrapping_add(imm_value(vars, i)), v);
            }
        }
        Ok(())
    }

    pub fn eval(&mut self, vars: &HashMap<String, i64>, e: &Expr) -> Result<i64, Halt> {
        match e {
            Expr::Const(c) => Ok(c.value()),
            Expr::LValue(LValue::Var(x)) => Ok(vars.get(x).copied().unwrap_or(0)),
            Expr::LValue(LValue::Field(b, a)) => {
                let addr = self.field_addr(vars.get(b).copied().unwrap_or(0), a)?;
                Ok(self.heap.read(addr))
            }
            Expr::LValue(LValue::Index(b, i)) => {
                let base = vars.get(b).copied().unwrap_or(0);
                if base == 0 {
                    return stuck("null array read");
                }
                Ok(self.heap.read(base.wrapping_add(imm_value(vars, i))))
            }
            Expr::Unary(UnOp::Not, x) => Ok((self.eval(vars, x)? == 0) as i64),
            Expr::Unary(UnOp::Neg, x) => Ok(self.eval(vars, x)?.wrapping_neg()),
            Expr::Binary(BinOp::And, a, b) => {
                if self.eval(vars, a)? == 0 {
                    Ok(0)
                } else {
                    Ok((self.eval(vars, b)? != 0) as i64)
                }
            }
            Expr::Binary(BinOp::Or, a, b) => {
                if self.eval(vars, a)? != 0 {
                    Ok(1)
                } else {
                    Ok((self.eval(vars, b)? != 0) as i64)
                }
            }
            Expr::Binary(op, a, b) => {
                let x = self.eval(vars, a)?;
                let y = self.eval(vars, b)?;
                apply_binop(*op, x, y).ok_or_else(|| Halt::Stuck("division by zero".into()))
            }
            Expr::Call(c) => {
                let saved = self.heap.clone();
                let r = self.eval_call(vars, c);
                self.heap = saved;
                r
            }
        }
    }

    fn eval_call(&mut self, vars: &HashMap<String, i64>, c: &CallExpr) -> Result<i64, Halt> {
        match &c.target {
            CallTarget::Static(class) => {
                let args = c.args.iter().map(|a| self.eval(vars, a)).collect::<Result<Vec<_>, _>>()?;
                self.static_call(class, &c.func, &args)
            }
            CallTarget::Virtual(r) => {
                let recv = self.eval(vars, r)?;
                let args = c.args.iter().map(|a| self.eval(vars, a)).collect::<Result<Vec<_>, _>>()?;
                self.virtual_call(recv, &c.func, &args)
            }
        }
    }
}

pub fn imm_value(vars: &HashMap<String, i64>, i: &Immediate) -> i64 {
    match i {
        Immediate::Var(v) => vars.get(v).copied().unwrap_or(0),
        Immediate::Const(c) => c.value(),
    }
}

/// Strict binary operators with 64-bit wrapping semantics. `None` on
/// division by zero.
pub fn apply_binop(op: BinOp, x: i64, y: i64) -> Option<i64> {
    let s = (y & 63) as u32;
    Some(match op {
        BinOp::Add => x.wrapping_add(y),
        BinOp::Sub => x.wrapping_sub(y),
        BinOp::Mul => x.wrapping_mul(y),
        BinOp::Div => {
            if y == 0 {
                return None;
            }
            x.wrapping_div(y)
        }
        BinOp::Rem => {
            if y == 0 {
                return None;
            }
            x.wrapping_rem(y)
        }
        BinOp::Eq => (x == y) as i64,
        BinOp::Ne => (x != y) as i64,
        BinOp::Lt => (x < y) as i64,
        BinOp::Le => (x <= y) as i64,
        BinOp::Gt => (x > y) as i64,
        BinOp::Ge => (x >= y) as i64,
        BinOp::And => (x != 0 && y != 0) as i64,
        BinOp::Or => (x != 0 || y != 0) as i64,
        BinOp::BitXor => x ^ y,
        BinOp::BitAnd => x & y,
        BinOp::BitOr => x | y,
        BinOp::Shl => x.wrapping_shl(s),
        BinOp::Shr => x.wrapping_shr(s),
        BinOp::UShr => ((x as u64) >> s) as i64,
    })
}
