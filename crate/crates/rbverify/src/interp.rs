//! Concrete big-step interpreter over the surface language. Two jobs:
//! replaying solver models as counterexample validation, and serving as the
//! ground-truth oracle for exhaustive-enumeration tests.

use crate::config::{Config, IntMode};
use crate::smt::{Model, ModelValue};
use crate::syntax::ast::{BaseName, Const, Expr, ExprKind, Label, MethodSignature};
use crate::translate::ir::{IDef, VerificationQuery};
use crate::translate::uninterp_name;
use crate::typesys::{mangle, ClassTable};
use crate::vcgen::{CheckKind, InputBinding, InputPart, QueryEncoding};
use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub enum CValue {
    Nil,
    Bool(bool),
    Int(BigInt),
    Real(BigRational),
    Obj(usize),
    Arr(usize),
    /// A class used as a receiver for singleton calls.
    ClassRef(String),
}

#[derive(Debug, Clone)]
pub struct CObj {
    pub class: String,
    pub fields: IndexMap<String, CValue>,
}

#[derive(Debug, Clone)]
pub struct CArr {
    pub items: Vec<CValue>,
}

/// Result of running a method concretely.
#[derive(Debug, Clone, PartialEq)]
pub enum COutcome {
    Normal(CValue),
    Exception,
    /// Precondition of an annotated callee (or `/` by zero) evaluated false.
    PreViolation(String),
    BoundsViolation,
    CapacityExceeded,
    AssumeUnmet,
    Unsupported(String),
}

/// Early-exit control flow inside evaluation.
enum Stop {
    Return(CValue),
    Exception,
    PreViolation(String),
    Bounds,
    Capacity,
    AssumeUnmet,
    Unsupported(String),
    Fuel,
}

type EResult = Result<CValue, Stop>;

pub struct Interp<'a> {
    pub table: &'a ClassTable,
    pub config: &'a Config,
    /// Interpretations for bodiless pure methods, from a sat model.
    pub model: Option<&'a Model>,
    pub objects: Vec<CObj>,
    pub arrays: Vec<CArr>,
    /// Encode-time object ids of reconstructed input objects, keyed by
    /// object handle. Lets bodiless pure callees take object arguments.
    pub model_obj_ids: HashMap<usize, BigInt>,
    fuel: u64,
    depth: usize,
}

impl<'a> Interp<'a> {
    pub fn new(table: &'a ClassTable, config: &'a Config) -> Self {
        Interp {
            table,
            config,
            model: None,
            objects: Vec::new(),
            arrays: Vec::new(),
            model_obj_ids: HashMap::new(),
            fuel: 1_000_000,
            depth: 0,
        }
    }

    pub fn with_model(table: &'a ClassTable, config: &'a Config, model: &'a Model) -> Self {
        let mut i = Interp::new(table, config);
        i.model = Some(model);
        i
    }

    pub fn alloc_object(&mut self, class: &str) -> CValue {
        let mut fields = IndexMap::new();
        for (f, _) in self.table.all_fields(class) {
            fields.insert(f, CValue::Nil);
        }
        self.objects.push(CObj {
            class: class.to_string(),
            fields,
        });
        CValue::Obj(self.objects.len() - 1)
    }

    pub fn alloc_array(&mut self, items: Vec<CValue>) -> CValue {
        self.arrays.push(CArr { items });
        CValue::Arr(self.arrays.len() - 1)
    }

    pub fn set_field(&mut self, obj: &CValue, field: &str, v: CValue) {
        if let CValue::Obj(h) = obj {
            self.objects[*h].fields.insert(field.to_string(), v);
        }
    }

    /// Wrap into the signed two's-complement range in bitvector mode.
    fn wrap(&self, n: BigInt) -> BigInt {
        match self.config.int_mode {
            IntMode::Int => n,
            IntMode::Bv(w) => {
                let modulus = BigInt::from(1) << w;
                let half = BigInt::from(1) << (w - 1);
                let v = ((n % &modulus) + &modulus) % &modulus;
                if v >= half {
                    v - modulus
                } else {
                    v
                }
            }
        }
    }

    pub fn run(
        &mut self,
        owner: &str,
        method: &str,
        singleton: bool,
        selfv: CValue,
        args: Vec<CValue>,
    ) -> COutcome {
        match self.invoke_named(owner, method, singleton, selfv, args, true) {
            Ok(v) => COutcome::Normal(v),
            Err(Stop::Return(v)) => COutcome::Normal(v),
            Err(Stop::Exception) => COutcome::Exception,
            Err(Stop::PreViolation(c)) => COutcome::PreViolation(c),
            Err(Stop::Bounds) => COutcome::BoundsViolation,
            Err(Stop::Capacity) => COutcome::CapacityExceeded,
            Err(Stop::AssumeUnmet) => COutcome::AssumeUnmet,
            Err(Stop::Unsupported(r)) => COutcome::Unsupported(r),
            Err(Stop::Fuel) => COutcome::Unsupported("step limit exceeded".into()),
        }
    }

    /// Evaluate a refinement predicate under `self` and explicit bindings.
    pub fn eval_predicate(
        &mut self,
        pred: &Expr,
        selfv: &CValue,
        bindings: &[(String, CValue)],
    ) -> Result<bool, COutcome> {
        let mut env: IndexMap<String, CValue> = bindings.iter().cloned().collect();
        match self.eval(pred, &mut env, selfv) {
            Ok(v) => Ok(self.truthy(&v)),
            Err(Stop::Return(v)) => Ok(self.truthy(&v)),
            Err(Stop::Exception) => Err(COutcome::Exception),
            Err(Stop::PreViolation(c)) => Err(COutcome::PreViolation(c)),
            Err(Stop::Bounds) => Err(COutcome::BoundsViolation),
            Err(Stop::Capacity) => Err(COutcome::CapacityExceeded),
            Err(Stop::AssumeUnmet) => Err(COutcome::AssumeUnmet),
            Err(Stop::Unsupported(r)) => Err(COutcome::Unsupported(r)),
            Err(Stop::Fuel) => Err(COutcome::Unsupported("step limit exceeded".into())),
        }
    }

    fn invoke_named(
        &mut self,
        owner: &str,
        method: &str,
        singleton: bool,
        selfv: CValue,
        args: Vec<CValue>,
        is_subject: bool,
    ) -> EResult {
        let entry = self
            .table
            .lookup_method(owner, method, singleton)
            .cloned()
            .ok_or_else(|| Stop::Unsupported(format!("no method {}#{}", owner, method)))?;
        // Annotated callees get their precondition checked at the call,
        // mirroring the encoding; the subject's own pre was checked by the
        // caller as an assumption.
        if !is_subject && !matches!(entry.label, Label::Exact) {
            if let Some(sig) = &entry.sig {
                self.check_pre(sig, &selfv, &args, &entry.mangled())?;
            }
        }
        match &entry.body {
            Some(body) => {
                // Call depth bounded well below the native stack.
                if self.depth >= 100 {
                    return Err(Stop::Fuel);
                }
                self.depth += 1;
                let mut env = IndexMap::new();
                for (p, v) in entry.params.iter().zip(args) {
                    env.insert(p.clone(), v);
                }
                let r = match self.eval(body, &mut env, &selfv) {
                    Ok(v) => Ok(v),
                    Err(Stop::Return(v)) => Ok(v),
                    Err(other) => Err(other),
                };
                self.depth -= 1;
                r
            }
            None => {
                // Bodiless pure method: use the model's interpretation of
                // its uninterpreted function, scalar args only.
                if !matches!(entry.label, Label::Pure | Label::Modifies(_)) {
                    return Err(Stop::Unsupported(format!(
                        "method {} has no body",
                        entry.mangled()
                    )));
                }
                if matches!(entry.label, Label::Modifies(_)) {
                    return Err(Stop::Unsupported(format!(
                        "modifies-labeled callee {} has no body",
                        entry.mangled()
                    )));
                }
                let model = self.model.ok_or_else(|| {
                    Stop::Unsupported(format!("no model interpretation for {}", entry.mangled()))
                })?;
                let uf_name = uninterp_name(&mangle(&entry.owner, &entry.name, entry.singleton));
                let mut margs = Vec::new();
                for v in std::iter::once(&selfv).chain(args.iter()) {
                    margs.push(self.to_model_value(v)?);
                }
                let sig = entry.sig.as_ref().ok_or_else(|| {
                    Stop::Unsupported(format!("pure method {} has no signature", entry.mangled()))
                })?;
                let result = match model.get_uf(&uf_name) {
                    Some(uf) => uf.apply(&margs),
                    // Unconstrained in the model: any value works; zero.
                    None => default_model_value(&sig.result.base)
                        .ok_or_else(|| {
                            Stop::Unsupported(format!(
                                "non-scalar result of bodiless pure method {}",
                                entry.mangled()
                            ))
                        })?,
                };
                self.from_model_value(&result, &sig.result.base)
            }
        }
    }

    fn check_pre(
        &mut self,
        sig: &MethodSignature,
        selfv: &CValue,
        args: &[CValue],
        callee: &str,
    ) -> Result<(), Stop> {
        let bindings: Vec<(String, CValue)> = sig
            .params
            .iter()
            .zip(args)
            .map(|(p, v)| (p.binder.clone(), v.clone()))
            .collect();
        for p in &sig.params {
            if p.is_trivial() {
                continue;
            }
            let mut env: IndexMap<String, CValue> = bindings.iter().cloned().collect();
            let v = self.eval(&p.predicate, &mut env, selfv)?;
            if !self.truthy(&v) {
                return Err(Stop::PreViolation(callee.to_string()));
            }
        }
        Ok(())
    }

    fn to_model_value(&self, v: &CValue) -> Result<ModelValue, Stop> {
        match v {
            CValue::Bool(b) => Ok(ModelValue::Bool(*b)),
            CValue::Int(n) => Ok(ModelValue::Int(match self.config.int_mode {
                IntMode::Int => n.clone(),
                // Models print bitvectors unsigned.
                IntMode::Bv(w) => crate::vcgen::wrap_bv(n.clone(), w),
            })),
            CValue::Real(r) => Ok(ModelValue::Real(r.clone())),
            CValue::Nil => Ok(ModelValue::Int(BigInt::from(0))),
            // Input objects participate by their encode-time id, mirroring
            // how the encoding passes objects to uninterpreted functions.
            CValue::Obj(h) => self
                .model_obj_ids
                .get(h)
                .map(|id| ModelValue::Int(id.clone()))
                .ok_or_else(|| {
                    Stop::Unsupported(
                        "object argument to bodiless pure method has no model id".into(),
                    )
                }),
            other => Err(Stop::Unsupported(format!(
                "non-scalar argument {:?} to bodiless pure method",
                other
            ))),
        }
    }

    fn from_model_value(&mut self, v: &ModelValue, base: &BaseName) -> EResult {
        match (v, base) {
            (ModelValue::Bool(b), _) => Ok(CValue::Bool(*b)),
            (ModelValue::Int(n), _) => Ok(CValue::Int(self.wrap(n.clone()))),
            (ModelValue::Real(r), _) => Ok(CValue::Real(r.clone())),
        }
    }

    pub fn truthy(&self, v: &CValue) -> bool {
        !matches!(v, CValue::Nil | CValue::Bool(false))
    }

    fn eval(&mut self, e: &Expr, env: &mut IndexMap<String, CValue>, selfv: &CValue) -> EResult {
        self.fuel = self.fuel.checked_sub(1).filter(|f| *f > 0).ok_or(Stop::Fuel)?;
        match &e.kind {
            ExprKind::Const(c) => Ok(match c {
                Const::Nil => CValue::Nil,
                Const::True => CValue::Bool(true),
                Const::False => CValue::Bool(false),
                Const::Int(n) => CValue::Int(self.wrap(n.clone())),
                Const::Float(s) => CValue::Real(parse_float(s)),
            }),
            ExprKind::Var(n) => match env.get(n) {
                Some(v) => Ok(v.clone()),
                None if self.table.get(n).is_some() => Ok(CValue::ClassRef(n.clone())),
                None => Ok(CValue::Nil),
            },
            ExprKind::Assign(n, v) => {
                let val = self.eval(v, env, selfv)?;
                env.insert(n.clone(), val.clone());
                Ok(val)
            }
            ExprKind::If(c, t, els) => {
                let cv = self.eval(c, env, selfv)?;
                if self.truthy(&cv) {
                    self.eval(t, env, selfv)
                } else {
                    self.eval(els, env, selfv)
                }
            }
            ExprKind::Seq(a, b) => {
                self.eval(a, env, selfv)?;
                self.eval(b, env, selfv)
            }
            ExprKind::SelfRef => Ok(selfv.clone()),
            ExprKind::FieldRead(f) => match selfv {
                CValue::Obj(h) => Ok(self.objects[*h]
                    .fields
                    .get(f)
                    .cloned()
                    .unwrap_or(CValue::Nil)),
                _ => Err(Stop::Unsupported(format!("field read @{} off-object", f))),
            },
            ExprKind::FieldAssign(f, v) => {
                let val = self.eval(v, env, selfv)?;
                match selfv {
                    CValue::Obj(h) => {
                        self.objects[*h].fields.insert(f.clone(), val.clone());
                        Ok(val)
                    }
                    _ => Err(Stop::Unsupported(format!("field write @{} off-object", f))),
                }
            }
            ExprKind::Call {
                recv, method, args, ..
            } => {
                if method == "assume" && matches!(recv.kind, ExprKind::SelfRef) && args.len() == 1 {
                    let v = self.eval(&args[0], env, selfv)?;
                    if !self.truthy(&v) {
                        return Err(Stop::AssumeUnmet);
                    }
                    return Ok(CValue::Nil);
                }
                let rv = self.eval(recv, env, selfv)?;
                let mut avs = Vec::new();
                for a in args {
                    avs.push(self.eval(a, env, selfv)?);
                }
                self.invoke(rv, method, avs)
            }
            ExprKind::New(c) => Ok(self.alloc_object(c)),
            ExprKind::Return(v) => {
                let val = self.eval(v, env, selfv)?;
                Err(Stop::Return(val))
            }
            ExprKind::Raise(_) => Err(Stop::Exception),
            ExprKind::ArrayLit(items) => {
                if items.len() > self.config.array_bound {
                    return Err(Stop::Capacity);
                }
                let mut vs = Vec::new();
                for it in items {
                    vs.push(self.eval(it, env, selfv)?);
                }
                Ok(self.alloc_array(vs))
            }
        }
    }

    fn invoke(&mut self, recv: CValue, method: &str, args: Vec<CValue>) -> EResult {
        // User-defined methods shadow builtins on user classes.
        match &recv {
            CValue::ClassRef(c) => {
                let c = c.clone();
                return self.invoke_named(&c, method, true, recv, args, false);
            }
            CValue::Obj(h) => {
                let class = self.objects[*h].class.clone();
                if self.table.lookup_method(&class, method, false).is_some() {
                    return self.invoke_named(&class, method, false, recv, args, false);
                }
            }
            _ => {}
        }
        self.builtin(recv, method, args)
    }

    fn builtin(&mut self, recv: CValue, method: &str, mut args: Vec<CValue>) -> EResult {
        match method {
            "==" => Ok(CValue::Bool(self.eq_values(&recv, &args[0]))),
            "!=" => Ok(CValue::Bool(!self.eq_values(&recv, &args[0]))),
            "nil?" => Ok(CValue::Bool(matches!(recv, CValue::Nil))),
            "classid" => {
                let id = match &recv {
                    CValue::Nil => crate::typesys::NILCLASS_ID,
                    CValue::Bool(_) => crate::typesys::BOOL_ID,
                    CValue::Int(_) => crate::typesys::INTEGER_ID,
                    CValue::Real(_) => crate::typesys::FLOAT_ID,
                    CValue::Arr(_) => crate::typesys::ARRAY_ID,
                    CValue::Obj(h) => {
                        let class = self.objects[*h].class.clone();
                        self.table.class_id(&class).unwrap_or(0)
                    }
                    CValue::ClassRef(_) => 0,
                };
                Ok(CValue::Int(BigInt::from(id)))
            }
            "-@" => match recv {
                CValue::Int(n) => Ok(CValue::Int(self.wrap(-n))),
                CValue::Real(r) => Ok(CValue::Real(-r)),
                other => Err(Stop::Unsupported(format!("negation of {:?}", other))),
            },
            "+" | "-" | "*" => {
                let b = args.remove(0);
                self.arith(method, recv, b)
            }
            "/" => {
                let b = args.remove(0);
                self.divide(recv, b)
            }
            "<" | "<=" | ">" | ">=" => {
                let b = args.remove(0);
                self.compare(method, recv, b)
            }
            "get" => {
                let h = self.array_of(&recv)?;
                let i = self.index_of(&args[0])?;
                let len = self.arrays[h].items.len();
                if i < 0 || (i as usize) >= len {
                    return Err(Stop::Bounds);
                }
                Ok(self.arrays[h].items[i as usize].clone())
            }
            "set" => {
                let h = self.array_of(&recv)?;
                let i = self.index_of(&args[0])?;
                let len = self.arrays[h].items.len();
                if i < 0 || (i as usize) >= len {
                    return Err(Stop::Bounds);
                }
                let v = args[1].clone();
                self.arrays[h].items[i as usize] = v.clone();
                Ok(v)
            }
            "push" | "<<" => {
                let h = self.array_of(&recv)?;
                if self.arrays[h].items.len() >= self.config.array_bound {
                    return Err(Stop::Capacity);
                }
                let v = args[0].clone();
                self.arrays[h].items.push(v);
                Ok(recv)
            }
            "size" => {
                let h = self.array_of(&recv)?;
                Ok(CValue::Int(BigInt::from(self.arrays[h].items.len())))
            }
            "include?" => {
                let h = self.array_of(&recv)?;
                let items = self.arrays[h].items.clone();
                let found = items.iter().any(|it| self.eq_values(it, &args[0]));
                Ok(CValue::Bool(found))
            }
            other => Err(Stop::Unsupported(format!(
                "builtin `{}` on {:?}",
                other, recv
            ))),
        }
    }

    fn array_of(&self, v: &CValue) -> Result<usize, Stop> {
        match v {
            CValue::Arr(h) => Ok(*h),
            other => Err(Stop::Unsupported(format!("array op on {:?}", other))),
        }
    }

    fn index_of(&self, v: &CValue) -> Result<i64, Stop> {
        match v {
            CValue::Int(n) => i64::try_from(n).map_err(|_| Stop::Bounds),
            other => Err(Stop::Unsupported(format!("array index {:?}", other))),
        }
    }

    /// Kind-separated equality: `Integer` and `Float` values never compare
    /// equal; objects compare by identity.
    pub fn eq_values(&self, a: &CValue, b: &CValue) -> bool {
        match (a, b) {
            (CValue::Nil, CValue::Nil) => true,
            (CValue::Bool(x), CValue::Bool(y)) => x == y,
            (CValue::Int(x), CValue::Int(y)) => x == y,
            (CValue::Real(x), CValue::Real(y)) => x == y,
            (CValue::Obj(x), CValue::Obj(y)) => x == y,
            (CValue::Arr(x), CValue::Arr(y)) => x == y,
            (CValue::ClassRef(x), CValue::ClassRef(y)) => x == y,
            _ => false,
        }
    }

    fn arith(&mut self, op: &str, a: CValue, b: CValue) -> EResult {
        match (a, b) {
            (CValue::Int(x), CValue::Int(y)) => {
                let r = match op {
                    "+" => x + y,
                    "-" => x - y,
                    "*" => x * y,
                    _ => unreachable!(),
                };
                Ok(CValue::Int(self.wrap(r)))
            }
            (a, b) => {
                let (x, y) = self.coerce_reals(a, b)?;
                let r = match op {
                    "+" => x + y,
                    "-" => x - y,
                    "*" => x * y,
                    _ => unreachable!(),
                };
                Ok(CValue::Real(r))
            }
        }
    }

    fn divide(&mut self, a: CValue, b: CValue) -> EResult {
        match (a, b) {
            (CValue::Int(x), CValue::Int(y)) => {
                if y == BigInt::from(0) {
                    return Err(Stop::PreViolation("/".into()));
                }
                // Ruby floor division; Rust's / truncates toward zero.
                let q = &x / &y;
                let r = &x % &y;
                let q = if r != BigInt::from(0)
                    && ((r < BigInt::from(0)) != (y < BigInt::from(0)))
                {
                    q - 1
                } else {
                    q
                };
                Ok(CValue::Int(self.wrap(q)))
            }
            (a, b) => {
                let (x, y) = self.coerce_reals(a, b)?;
                if y == BigRational::from(BigInt::from(0)) {
                    return Err(Stop::PreViolation("/".into()));
                }
                Ok(CValue::Real(x / y))
            }
        }
    }

    fn compare(&mut self, op: &str, a: CValue, b: CValue) -> EResult {
        let r = match (a, b) {
            (CValue::Int(x), CValue::Int(y)) => match op {
                "<" => x < y,
                "<=" => x <= y,
                ">" => x > y,
                ">=" => x >= y,
                _ => unreachable!(),
            },
            (a, b) => {
                let (x, y) = self.coerce_reals(a, b)?;
                match op {
                    "<" => x < y,
                    "<=" => x <= y,
                    ">" => x > y,
                    ">=" => x >= y,
                    _ => unreachable!(),
                }
            }
        };
        Ok(CValue::Bool(r))
    }

    fn coerce_reals(&self, a: CValue, b: CValue) -> Result<(BigRational, BigRational), Stop> {
        let conv = |v: CValue| -> Result<BigRational, Stop> {
            match v {
                CValue::Int(n) => {
                    if matches!(self.config.int_mode, IntMode::Bv(_)) {
                        return Err(Stop::Unsupported(
                            "mixed integer/float arithmetic in bitvector mode".into(),
                        ));
                    }
                    Ok(BigRational::from(n))
                }
                CValue::Real(r) => Ok(r),
                other => Err(Stop::Unsupported(format!("arithmetic on {:?}", other))),
            }
        };
        Ok((conv(a)?, conv(b)?))
    }
}

pub fn parse_float(s: &str) -> BigRational {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int_part, frac) = body.split_once('.').unwrap_or((body, ""));
    let scale = BigInt::from(10).pow(frac.len() as u32);
    let i: BigInt = int_part.parse().unwrap_or_default();
    let f: BigInt = if frac.is_empty() {
        BigInt::from(0)
    } else {
        frac.parse().unwrap_or_default()
    };
    let num = i * &scale + f;
    let num = if neg { -num } else { num };
    BigRational::new(num, scale)
}

fn default_model_value(base: &BaseName) -> Option<ModelValue> {
    match base {
        BaseName::Class(n) if n == "Integer" => Some(ModelValue::Int(BigInt::from(0))),
        BaseName::Class(n) if n == "Float" => {
            Some(ModelValue::Real(BigRational::from(BigInt::from(0))))
        }
        BaseName::Class(n) if n == "Bool" => Some(ModelValue::Bool(false)),
        _ => None,
    }
}

// ---- rebuilding concrete inputs from a model ----

fn model_int(mv: &ModelValue, mode: IntMode) -> Option<BigInt> {
    let ModelValue::Int(n) = mv else { return None };
    Some(match mode {
        IntMode::Int => n.clone(),
        IntMode::Bv(w) => {
            let half = BigInt::from(1) << (w - 1);
            let modulus = BigInt::from(1) << w;
            if *n >= half {
                n.clone() - modulus
            } else {
                n.clone()
            }
        }
    })
}

fn find_binding<'b>(
    bindings: &'b [InputBinding],
    root: &str,
    field: Option<&str>,
    part: &InputPart,
) -> Option<&'b InputBinding> {
    bindings
        .iter()
        .find(|b| b.root == root && b.field.as_deref() == field && b.part == *part)
}

fn lookup_scalar(
    interp: &Interp,
    model: &Model,
    bindings: &[InputBinding],
    root: &str,
    field: Option<&str>,
    part: &InputPart,
    base: &BaseName,
) -> Option<CValue> {
    let b = find_binding(bindings, root, field, part);
    let mv = b.and_then(|b| model.get(&b.smt_name));
    concrete_scalar(interp, mv, base)
}

fn concrete_scalar(interp: &Interp, mv: Option<&ModelValue>, base: &BaseName) -> Option<CValue> {
    match base {
        BaseName::Class(n) if n == "Integer" => Some(CValue::Int(match mv {
            Some(v) => model_int(v, interp.config.int_mode)?,
            None => BigInt::from(0),
        })),
        BaseName::Class(n) if n == "Float" => Some(CValue::Real(match mv {
            Some(ModelValue::Real(r)) => r.clone(),
            Some(ModelValue::Int(n)) => BigRational::from(n.clone()),
            _ => BigRational::from(BigInt::from(0)),
        })),
        BaseName::Class(n) if n == "Bool" => Some(CValue::Bool(match mv {
            Some(ModelValue::Bool(b)) => *b,
            _ => false,
        })),
        BaseName::Nil => Some(CValue::Nil),
        BaseName::Class(n) if n == "NilClass" => Some(CValue::Nil),
        _ => None,
    }
}

fn build_value(
    interp: &mut Interp,
    model: &Model,
    bindings: &[InputBinding],
    root: &str,
    field: Option<&str>,
    base: &BaseName,
) -> Option<CValue> {
    match base {
        BaseName::Class(n) if matches!(n.as_str(), "Integer" | "Float" | "Bool" | "NilClass") => {
            lookup_scalar(interp, model, bindings, root, field, &InputPart::Value, base)
        }
        BaseName::Nil => Some(CValue::Nil),
        BaseName::Array(elem) => {
            let len = find_binding(bindings, root, field, &InputPart::Len)
                .and_then(|b| model.get(&b.smt_name))
                .and_then(|v| model_int(v, interp.config.int_mode))
                .unwrap_or_default();
            let len = usize::try_from(&len).ok()?.min(interp.config.array_bound);
            let mut items = Vec::new();
            for i in 0..len {
                let b = find_binding(bindings, root, field, &InputPart::Cell(i));
                let mv = b.and_then(|b| model.get(&b.smt_name));
                items.push(concrete_scalar(interp, mv, elem)?);
            }
            Some(interp.alloc_array(items))
        }
        BaseName::Union(members) => {
            let id = find_binding(bindings, root, field, &InputPart::ClassId)
                .and_then(|b| model.get(&b.smt_name))
                .and_then(|v| model_int(v, IntMode::Int))?;
            for m in members {
                let mid = match m {
                    BaseName::Class(n) => interp.table.class_id(n).or(match n.as_str() {
                        "Integer" => Some(crate::typesys::INTEGER_ID),
                        "Float" => Some(crate::typesys::FLOAT_ID),
                        "Bool" => Some(crate::typesys::BOOL_ID),
                        "NilClass" => Some(crate::typesys::NILCLASS_ID),
                        _ => None,
                    }),
                    BaseName::Nil => Some(crate::typesys::NILCLASS_ID),
                    BaseName::Array(_) => Some(crate::typesys::ARRAY_ID),
                    BaseName::Union(_) => None,
                }?;
                if BigInt::from(mid) == id {
                    let b = find_binding(bindings, root, field, &InputPart::UnionMember(m.clone()));
                    let mv = b.and_then(|b| model.get(&b.smt_name));
                    return match m {
                        BaseName::Class(n)
                            if matches!(n.as_str(), "Integer" | "Float" | "Bool") =>
                        {
                            concrete_scalar(interp, mv, m)
                        }
                        BaseName::Nil => Some(CValue::Nil),
                        BaseName::Class(n) if n == "NilClass" => Some(CValue::Nil),
                        BaseName::Class(n) => Some(interp.alloc_object(n)),
                        _ => None,
                    };
                }
            }
            None
        }
        BaseName::Class(class) => {
            // Object input: populate declared fields from the model.
            let obj = interp.alloc_object(class);
            let fields = interp.table.all_fields(class);
            for (f, fbase) in fields {
                // Only one level of named fields exists in the encoding.
                if field.is_some() {
                    continue;
                }
                let v = build_value(interp, model, bindings, root, Some(&f), &fbase)?;
                interp.set_field(&obj, &f, v);
            }
            Some(obj)
        }
    }
}

/// Reconstruct `(self, args)` for the subject from a sat model. `None`
/// means the inputs are outside what replay supports.
pub fn build_inputs(
    interp: &mut Interp,
    enc: &QueryEncoding,
    model: &Model,
    query: &VerificationQuery,
) -> Option<(CValue, Vec<CValue>)> {
    let mut selfv = None;
    let mut args = Vec::new();
    for d in &query.sym_inputs {
        let IDef::SymDef { name, base } = d else { continue };
        let v = build_value(interp, model, &enc.inputs, name, None, base)?;
        if let CValue::Obj(h) = &v {
            if let Some((_, id)) = enc.object_ids.iter().find(|(r, _)| r == name) {
                interp.model_obj_ids.insert(*h, id.clone());
            }
        }
        if name == "self" {
            selfv = Some(v);
        } else {
            args.push(v);
        }
    }
    let selfv = match selfv {
        Some(v) => v,
        None if query.singleton => CValue::ClassRef(query.owner.clone()),
        None => interp.alloc_object(&query.owner),
    };
    Some((selfv, args))
}

/// Which failure a counterexample claims.
#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    Postcondition,
    Raise,
    Check(CheckKind),
}

impl Trigger {
    pub fn describe(&self) -> String {
        match self {
            Trigger::Postcondition => "postconditionViolated".into(),
            Trigger::Raise => "exceptionRaised".into(),
            Trigger::Check(CheckKind::CalleePre(c)) => {
                format!("calleePreconditionViolated({})", c)
            }
            Trigger::Check(CheckKind::NonNil) => "nilReceiver".into(),
            Trigger::Check(CheckKind::ArrayBounds) => "arrayIndexOutOfBounds".into(),
            Trigger::Check(CheckKind::Capacity) => "arrayCapacityExceeded".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Replay {
    Confirmed,
    NotConfirmed(String),
    Skipped(String),
}

/// Run the subject on the model's inputs and check that the claimed
/// trigger reproduces.
pub fn replay_counterexample(
    table: &ClassTable,
    config: &Config,
    enc: &QueryEncoding,
    query: &VerificationQuery,
    model: &Model,
    trigger: &Trigger,
) -> Replay {
    let mut interp = Interp::with_model(table, config, model);
    let Some((selfv, args)) = build_inputs(&mut interp, enc, model, query) else {
        return Replay::Skipped("inputs not concretely reconstructible".into());
    };
    let outcome = interp.run(
        &query.owner,
        &query.method,
        query.singleton,
        selfv.clone(),
        args.clone(),
    );
    match (&outcome, trigger) {
        (COutcome::Exception, Trigger::Raise) => Replay::Confirmed,
        (COutcome::PreViolation(_), Trigger::Check(CheckKind::CalleePre(_))) => Replay::Confirmed,
        (COutcome::BoundsViolation, Trigger::Check(CheckKind::ArrayBounds)) => Replay::Confirmed,
        (COutcome::CapacityExceeded, Trigger::Check(CheckKind::Capacity)) => Replay::Confirmed,
        (COutcome::Normal(v), Trigger::Postcondition) => {
            let sig = &query.sig;
            let mut bindings: Vec<(String, CValue)> = sig
                .params
                .iter()
                .zip(&args)
                .map(|(p, a)| (p.binder.clone(), a.clone()))
                .collect();
            bindings.push((sig.result.binder.clone(), v.clone()));
            match interp.eval_predicate(&sig.result.predicate, &selfv, &bindings) {
                Ok(false) => Replay::Confirmed,
                Ok(true) => Replay::NotConfirmed("postcondition held on replay".into()),
                Err(o) => Replay::Skipped(format!("predicate replay failed: {:?}", o)),
            }
        }
        (COutcome::Unsupported(r), _) => Replay::Skipped(r.clone()),
        (o, t) => Replay::NotConfirmed(format!(
            "replay produced {:?}, counterexample claims {}",
            o,
            t.describe()
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(src: &str) -> (ClassTable, Config) {
        let prog = crate::syntax::parse_program(src).unwrap();
        let mut table = crate::typesys::build_class_table(&prog).unwrap();
        crate::expand::expand_generators(&mut table).unwrap();
        (table, Config::default())
    }

    fn run_main(src: &str, method: &str, args: Vec<CValue>) -> COutcome {
        let (table, config) = setup(src);
        let mut i = Interp::new(&table, &config);
        let s = i.alloc_object("Main");
        i.run("Main", method, false, s, args)
    }

    #[test]
    fn branches_and_arithmetic() {
        let src = "def incr(x)\n  if x == 59\n    0\n  else\n    x + 1\n  end\nend\n";
        assert_eq!(
            run_main(src, "incr", vec![CValue::Int(BigInt::from(59))]),
            COutcome::Normal(CValue::Int(BigInt::from(0)))
        );
        assert_eq!(
            run_main(src, "incr", vec![CValue::Int(BigInt::from(3))]),
            COutcome::Normal(CValue::Int(BigInt::from(4)))
        );
    }

    #[test]
    fn floor_division() {
        let src = "def d(a, b)\n  a / b\nend\n";
        let cases = [(7, 2, 3), (-7, 2, -4), (7, -2, -4), (-7, -2, 3), (6, 3, 2)];
        for (a, b, want) in cases {
            assert_eq!(
                run_main(
                    src,
                    "d",
                    vec![CValue::Int(BigInt::from(a)), CValue::Int(BigInt::from(b))]
                ),
                COutcome::Normal(CValue::Int(BigInt::from(want))),
                "{} / {}",
                a,
                b
            );
        }
        assert_eq!(
            run_main(
                src,
                "d",
                vec![CValue::Int(BigInt::from(1)), CValue::Int(BigInt::from(0))]
            ),
            COutcome::PreViolation("/".into())
        );
    }

    #[test]
    fn early_return_and_raise() {
        let src = "def f(x)\n  return 1\n  2\nend\ndef g(x)\n  if x > 0\n    raise 'boom'\n  end\n  x\nend\n";
        assert_eq!(
            run_main(src, "f", vec![CValue::Int(BigInt::from(0))]),
            COutcome::Normal(CValue::Int(BigInt::from(1)))
        );
        assert_eq!(
            run_main(src, "g", vec![CValue::Int(BigInt::from(5))]),
            COutcome::Exception
        );
        assert_eq!(
            run_main(src, "g", vec![CValue::Int(BigInt::from(-5))]),
            COutcome::Normal(CValue::Int(BigInt::from(-5)))
        );
    }

    #[test]
    fn kind_separated_equality() {
        let src = "def f(x)\n  x == 1.0\nend\n";
        assert_eq!(
            run_main(src, "f", vec![CValue::Int(BigInt::from(1))]),
            COutcome::Normal(CValue::Bool(false))
        );
    }

    #[test]
    fn arrays_bounds_and_capacity() {
        let src = "def f()\n  a = [1, 2, 3]\n  a[1]\nend\ndef g()\n  a = [1]\n  a[5]\nend\ndef h()\n  a = []\n  a.push(1)\n  a.size\nend\n";
        assert_eq!(
            run_main(src, "f", vec![]),
            COutcome::Normal(CValue::Int(BigInt::from(2)))
        );
        assert_eq!(run_main(src, "g", vec![]), COutcome::BoundsViolation);
        assert_eq!(
            run_main(src, "h", vec![]),
            COutcome::Normal(CValue::Int(BigInt::from(1)))
        );
    }

    #[test]
    fn push_beyond_capacity() {
        let mut body = String::from("def f()\n  a = []\n");
        for i in 0..11 {
            body.push_str(&format!("  a.push({})\n", i));
        }
        body.push_str("  a.size\nend\n");
        assert_eq!(run_main(&body, "f", vec![]), COutcome::CapacityExceeded);
    }

    #[test]
    fn bv_mode_wraps() {
        let src = "def f(x)\n  x + 1\nend\n";
        let (table, _) = setup(src);
        let config = Config {
            int_mode: IntMode::Bv(8),
            ..Config::default()
        };
        let mut i = Interp::new(&table, &config);
        let s = i.alloc_object("Main");
        assert_eq!(
            i.run("Main", "f", false, s, vec![CValue::Int(BigInt::from(127))]),
            COutcome::Normal(CValue::Int(BigInt::from(-128)))
        );
    }

    #[test]
    fn assume_unmet_stops_evaluation() {
        let src = "def f(x)\n  assume(x > 0)\n  x\nend\n";
        assert_eq!(
            run_main(src, "f", vec![CValue::Int(BigInt::from(-1))]),
            COutcome::AssumeUnmet
        );
        assert_eq!(
            run_main(src, "f", vec![CValue::Int(BigInt::from(2))]),
            COutcome::Normal(CValue::Int(BigInt::from(2)))
        );
    }

    #[test]
    fn annotated_callee_pre_checked() {
        let src = "class A\n  type :half, '(Integer x { x >= 0 }) -> Integer r { r >= 0 }', :pure\n  def half(x)\n    x / 2\n  end\n  def go(y)\n    half(y)\n  end\nend\n";
        let (table, config) = setup(src);
        let mut i = Interp::new(&table, &config);
        let s = i.alloc_object("A");
        assert_eq!(
            i.run("A", "go", false, s.clone(), vec![CValue::Int(BigInt::from(-4))]),
            COutcome::PreViolation("A_half".into())
        );
        assert_eq!(
            i.run("A", "go", false, s, vec![CValue::Int(BigInt::from(4))]),
            COutcome::Normal(CValue::Int(BigInt::from(2)))
        );
    }

    #[test]
    fn recursion_runs_out_of_fuel() {
        let src = "def f(x)\n  f(x)\nend\n";
        assert!(matches!(
            run_main(src, "f", vec![CValue::Int(BigInt::from(0))]),
            COutcome::Unsupported(_)
        ));
    }
}
