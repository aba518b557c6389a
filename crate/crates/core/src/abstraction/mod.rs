//! Hand-written models that stand in for functions of `@network` classes.
//!
//! A model has a concrete semantics (used by the interpreter) and a
//! symbolic one (used by the encoder in place of a computed summary). The
//! two are kept in lock step by tests that sample both.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{FuncSig, FunctionDecl, Param, Program, Type};
use crate::smt::Term;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum ModelTemplate {
    /// `this.equals(o)`: same dynamic type and same `field`.
    ValueEquals { field: String },
    /// `this.f()` returns `this.field` (hash codes, getters).
    FieldProjection { field: String },
    /// `this.f(v)` stores `v` into `this.field` and returns 0.
    Setter { field: String },
    /// Static `C.f(v)` allocates a `class` object whose `field` is `v`.
    Allocate { class: String, field: String },
}

impl ModelTemplate {
    /// Parameter count (receiver excluded).
    pub fn arity(&self) -> usize {
        match self {
            ModelTemplate::FieldProjection { .. } => 0,
            _ => 1,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, ModelTemplate::Allocate { .. })
    }

    pub fn field(&self) -> &str {
        match self {
            ModelTemplate::ValueEquals { field }
            | ModelTemplate::FieldProjection { field }
            | ModelTemplate::Setter { field }
            | ModelTemplate::Allocate { field, .. } => field,
        }
    }

    fn offset(&self, p: &Program, class: &str) -> Result<i64, ModelFault> {
        let owner = match self {
            ModelTemplate::Allocate { class, .. } => class.as_str(),
            _ => class,
        };
        p.field_offset(owner, self.field())
            .ok_or_else(|| ModelFault::UnknownField(owner.to_string(), self.field().to_string()))
    }

    /// Concrete semantics. `args` holds the receiver first for instance
    /// models; `class` is the class the model is attached to.
    pub fn eval(&self, p: &Program, class: &str, heap: &mut dyn ModelHeap, args: &[i64]) -> Result<i64, ModelFault> {
        let off = self.offset(p, class)?;
        let recv = || -> Result<i64, ModelFault> {
            match args.first() {
                Some(0) => Err(ModelFault::NullReceiver),
                Some(r) => Ok(*r),
                None => Err(ModelFault::Arity),
            }
        };
        match self {
            ModelTemplate::ValueEquals { .. } => {
                let this = recv()?;
                let other = *args.get(1).ok_or(ModelFault::Arity)?;
                if other == 0 {
                    return Ok(0);
                }
                let same_type = heap.dtype(this)? == heap.dtype(other)?;
                if !same_type {
                    return Ok(0);
                }
                Ok((heap.load(this + off)? == heap.load(other + off)?) as i64)
            }
            ModelTemplate::FieldProjection { .. } => heap.load(recv()? + off),
            ModelTemplate::Setter { .. } => {
                let this = recv()?;
                heap.store(this + off, *args.get(1).ok_or(ModelFault::Arity)?);
                Ok(0)
            }
            ModelTemplate::Allocate { class, .. } => {
                let v = *args.first().ok_or(ModelFault::Arity)?;
                let a = heap.alloc(p, class)?;
                heap.store(a + off, v);
                Ok(a)
            }
        }
    }

    /// Symbolic semantics over memory `m_in` and dynamic-type array `dt`.
    pub fn encode(
        &self,
        p: &Program,
        class: &str,
        args: &[Term],
        m_in: &Term,
        dt: &Term,
    ) -> Result<SymEffect, ModelFault> {
        let off = Term::int(self.offset(p, class)?);
        let field = |obj: &Term, m: &Term| Term::select(m.clone(), Term::add(obj.clone(), off.clone()));
        let arg = |i: usize| args.get(i).cloned().ok_or(ModelFault::Arity);
        let nonnull = |t: &Term| Term::ne(t.clone(), Term::int(0));
        Ok(match self {
            ModelTemplate::ValueEquals { .. } => {
                let (this, other) = (arg(0)?, arg(1)?);
                let eq = Term::and([
                    nonnull(&other),
                    Term::eq(Term::select(dt.clone(), this.clone()), Term::select(dt.clone(), other.clone())),
                    Term::eq(field(&this, m_in), field(&other, m_in)),
                ]);
                SymEffect {
                    ret: Term::ite(eq, Term::int(1), Term::int(0)),
                    m_out: m_in.clone(),
                    requires: vec![nonnull(&this)],
                }
            }
            ModelTemplate::FieldProjection { .. } => {
                let this = arg(0)?;
                SymEffect { ret: field(&this, m_in), m_out: m_in.clone(), requires: vec![nonnull(&this)] }
            }
            ModelTemplate::Setter { .. } => {
                let (this, v) = (arg(0)?, arg(1)?);
                SymEffect {
                    ret: Term::int(0),
                    m_out: Term::store(m_in.clone(), Term::add(this.clone(), off.clone()), v),
                    requires: vec![nonnull(&this)],
                }
            }
            ModelTemplate::Allocate { class, .. } => {
                let v = arg(0)?;
                let (a, m1, dt_fact) =
                    crate::encoder::alloc(p, class, m_in, dt).ok_or_else(|| ModelFault::UnknownClass(class.clone()))?;
                SymEffect {
                    ret: a.clone(),
                    m_out: Term::store(m1, Term::add(a, off.clone()), v),
                    requires: vec![dt_fact],
                }
            }
        })
    }
}

/// Result of a symbolic model application.
#[derive(Debug, Clone)]
pub struct SymEffect {
    pub ret: Term,
    pub m_out: Term,
    /// Must hold whenever the call happens.
    pub requires: Vec<Term>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelFault {
    #[error("null receiver")]
    NullReceiver,
    #[error("wrong number of arguments")]
    Arity,
    #[error("unknown field {0}.{1}")]
    UnknownField(String, String),
    #[error("unknown class {0}")]
    UnknownClass(String),
    /// Partial heaps (fast validation) cannot answer the read.
    #[error("value not known")]
    Unknown,
}

/// Heap access needed by concrete models.
pub trait ModelHeap {
    fn load(&mut self, addr: i64) -> Result<i64, ModelFault>;
    fn store(&mut self, addr: i64, v: i64);
    fn dtype(&mut self, addr: i64) -> Result<i64, ModelFault>;
    fn alloc(&mut self, p: &Program, class: &str) -> Result<i64, ModelFault>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractModel {
    pub sig: FuncSig,
    pub template: ModelTemplate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelRegistry {
    models: BTreeMap<FuncSig, ModelTemplate>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad manifest key {0:?}; expected \"Class.func\" or \"Class.func/arity\"")]
    Key(String),
}

impl ModelRegistry {
    pub fn new() -> Self {
        ModelRegistry::default()
    }

    /// Models for `MacAddress` and `IPv4Address` value wrappers.
    pub fn builtin() -> Self {
        ModelRegistry::new().value_wrapper("MacAddress", "value").value_wrapper("IPv4Address", "value")
    }

    pub fn register(mut self, m: AbstractModel) -> Self {
        self.models.insert(m.sig, m.template);
        self
    }

    /// `of(v)`, `equals(o)` and `hashCode()` for a class wrapping one
    /// scalar field.
    pub fn value_wrapper(self, class: &str, field: &str) -> Self {
        let f = field.to_string();
        self.register(AbstractModel {
            sig: FuncSig::new(class, "of", 1),
            template: ModelTemplate::Allocate { class: class.to_string(), field: f.clone() },
        })
        .register(AbstractModel {
            sig: FuncSig::new(class, "equals", 1),
            template: ModelTemplate::ValueEquals { field: f.clone() },
        })
        .register(AbstractModel {
            sig: FuncSig::new(class, "hashCode", 0),
            template: ModelTemplate::FieldProjection { field: f },
        })
    }

    pub fn get(&self, sig: &FuncSig) -> Option<&ModelTemplate> {
        self.models.get(sig)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = AbstractModel> + '_ {
        self.models.iter().map(|(s, t)| AbstractModel { sig: s.clone(), template: t.clone() })
    }

    /// Adds the bindings of a JSON manifest such as
    /// `{"Ip.same": {"template": "value_equals", "field": "addr"}}`.
    pub fn with_manifest(mut self, json: &str) -> Result<Self, ManifestError> {
        let raw: BTreeMap<String, ModelTemplate> = serde_json::from_str(json)?;
        for (key, template) in raw {
            let (path, arity) = match key.split_once('/') {
                Some((p, n)) => (p, n.parse::<usize>().map_err(|_| ManifestError::Key(key.clone()))?),
                None => (key.as_str(), template.arity()),
            };
            let (class, func) = path.split_once('.').ok_or_else(|| ManifestError::Key(key.clone()))?;
            if class.is_empty() || func.is_empty() {
                return Err(ManifestError::Key(key.clone()));
            }
            self = self.register(AbstractModel { sig: FuncSig::new(class, func, arity), template });
        }
        Ok(self)
    }
}

/// Attaches registered models to the functions of `@network` classes and
/// adds implicit `get_<field>` / `set_<field>` accessors.
pub fn apply_abstraction(p: &Program, r: &ModelRegistry) -> Program {
    let mut out = p.clone();
    for c in out.classes.iter_mut().filter(|c| c.is_network) {
        for f in c.functions.iter_mut() {
            let sig = FuncSig::new(&c.name, &f.name, f.params.len());
            match r.get(&sig) {
                Some(t) if t.is_static() == f.is_static && p.field_offset(&c.name, t.field()).is_some() => {
                    f.model = Some(t.clone());
                }
                Some(_) => warn!("model for {sig} does not fit its declaration; keeping the body"),
                None if f.model.is_none() => warn!("no model for network function {sig}; keeping the body"),
                None => {}
            }
        }
        for field in c.fields.clone() {
            let getter = format!("get_{}", field.name);
            if !c.functions.iter().any(|f| f.name == getter && f.params.is_empty()) {
                c.functions.push(FunctionDecl {
                    name: getter,
                    is_static: false,
                    params: vec![],
                    ret_ty: field.ty.clone(),
                    body: vec![],
                    model: Some(ModelTemplate::FieldProjection { field: field.name.clone() }),
                });
            }
            let setter = format!("set_{}", field.name);
            if !c.functions.iter().any(|f| f.name == setter && f.params.len() == 1) {
                c.functions.push(FunctionDecl {
                    name: setter,
                    is_static: false,
                    params: vec![Param { name: "v".into(), ty: field.ty.clone() }],
                    ret_ty: Some(Type::Int),
                    body: vec![],
                    model: Some(ModelTemplate::Setter { field: field.name.clone() }),
                });
            }
        }
    }
    out
}
