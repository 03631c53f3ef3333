//! Symbolic evaluation of λ_I into one satisfiability problem per query.
//! No heap forking: branch conditions guard every write (`cell := ite(g,
//! new, old)`), `return`/`raise` lower to guard terms that make later
//! statements no-ops on finished paths.

pub mod term;
pub mod value;

use crate::config::{Config, IntMode};
use crate::syntax::ast::{BaseName, Const};
use crate::translate::ir::{AssertKind, IDef, IExpr, VerificationQuery};
use crate::translate::GlobalState;
use crate::typesys::{ClassTable, NILCLASS_ID};
use indexmap::IndexMap;
use num_bigint::BigInt;
use term::{and, and_all, eq, implies, ite, not, or, or_all, Op, Sort, Term};
use value::{merge, Heap, SymValue};

/// Why a proof obligation exists; decides the verdict and the reported
/// trigger when it can be violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckKind {
    CalleePre(String),
    NonNil,
    ArrayBounds,
    /// Array capacity overflow: verdict BOUND_EXCEEDED, not UNSAFE.
    Capacity,
}

/// Where a symbolic input lives in the surface program; replay uses this to
/// rebuild concrete inputs from a model.
#[derive(Debug, Clone, PartialEq)]
pub enum InputPart {
    Value,
    ClassId,
    Len,
    Cell(usize),
    /// Payload for one member of a union-typed input.
    UnionMember(BaseName),
}

#[derive(Debug, Clone)]
pub struct InputBinding {
    /// `self` or a parameter name.
    pub root: String,
    /// Set when the input is a field of an object-typed root.
    pub field: Option<String>,
    pub part: InputPart,
    pub smt_name: String,
    pub display: String,
    pub sort: Sort,
}

#[derive(Debug, Clone)]
pub struct QueryEncoding {
    pub decls: Vec<(String, Sort)>,
    pub ufs: Vec<(String, Vec<Sort>, Sort)>,
    /// Structural facts: array length ranges, assumed postconditions, ...
    pub background: Term,
    /// The subject's translated parameter refinements.
    pub assumptions: Term,
    pub guarantee: Term,
    pub raise_cond: Term,
    /// (kind, violation condition) per proof obligation.
    pub checks: Vec<(CheckKind, Term)>,
    pub inputs: Vec<InputBinding>,
    /// Encode-time object id of each top-level object input, by root name.
    /// Replay uses these to look up uninterpreted-function model cases.
    pub object_ids: Vec<(String, BigInt)>,
}

impl QueryEncoding {
    pub fn capacity_ok(&self) -> Term {
        not(or_all(
            self.checks
                .iter()
                .filter(|(k, _)| *k == CheckKind::Capacity)
                .map(|(_, t)| t.clone()),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodeError {
    /// Exact-call inlining exceeded the depth limit: verdict UNKNOWN.
    DepthExceeded,
    Unsupported(String),
}

impl std::fmt::Display for EncodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncodeError::DepthExceeded => write!(f, "inline depth limit exceeded"),
            EncodeError::Unsupported(m) => write!(f, "{}", m),
        }
    }
}

struct Frame {
    env: IndexMap<String, SymValue>,
    ret_guard: Term,
    ret_val: SymValue,
}

impl Frame {
    fn new() -> Frame {
        Frame {
            env: IndexMap::new(),
            ret_guard: Term::fls(),
            ret_val: SymValue::Undefined,
        }
    }
}

pub struct Evaluator<'a> {
    table: &'a ClassTable,
    state: &'a GlobalState,
    config: &'a Config,
    defs: IndexMap<String, (Vec<String>, IExpr)>,
    pub heap: Heap,
    pub decls: IndexMap<String, Sort>,
    pub ufs: IndexMap<String, (Vec<Sort>, Sort)>,
    pub constraints: Vec<Term>,
    pub background: Vec<Term>,
    pub checks: Vec<(CheckKind, Term)>,
    pub inputs: Vec<InputBinding>,
    pub object_ids: Vec<(String, BigInt)>,
    raise_guard: Term,
    fresh: u64,
    next_obj_id: i64,
    next_sym_id: i64,
}

type VResult = Result<SymValue, EncodeError>;

impl<'a> Evaluator<'a> {
    pub fn new(table: &'a ClassTable, state: &'a GlobalState, config: &'a Config) -> Self {
        Evaluator {
            table,
            state,
            config,
            defs: IndexMap::new(),
            heap: Heap::default(),
            decls: IndexMap::new(),
            ufs: IndexMap::new(),
            constraints: Vec::new(),
            background: Vec::new(),
            checks: Vec::new(),
            inputs: Vec::new(),
            object_ids: Vec::new(),
            raise_guard: Term::fls(),
            fresh: 0,
            next_obj_id: 1,
            next_sym_id: -1,
        }
    }

    fn int_sort(&self) -> Sort {
        match self.config.int_mode {
            IntMode::Int => Sort::Int,
            IntMode::Bv(w) => Sort::BitVec(w),
        }
    }

    fn int_lit(&self, n: impl Into<BigInt>) -> Term {
        match self.config.int_mode {
            IntMode::Int => Term::IntLit(n.into()),
            IntMode::Bv(w) => Term::BvLit(wrap_bv(n.into(), w), w),
        }
    }

    fn fresh_name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{}%{}", prefix, self.fresh)
    }

    fn declare(&mut self, name: &str, sort: Sort) -> Term {
        self.decls.insert(name.to_string(), sort);
        Term::Const(name.to_string())
    }

    fn live(&self, path: &Term, frame: &Frame) -> Term {
        and(
            path.clone(),
            and(not(frame.ret_guard.clone()), not(self.raise_guard.clone())),
        )
    }

    // ---- symbolic inputs ----

    /// Fresh symbolic of a base type. When `binding` is given the created
    /// constants are recorded as counterexample-relevant inputs.
    pub fn symbolic(
        &mut self,
        base: &BaseName,
        binding: Option<(&str, Option<&str>)>,
        depth: usize,
    ) -> Result<SymValue, EncodeError> {
        let named = |this: &mut Self, part: InputPart, suffix: &str, sort: Sort| -> Term {
            match binding {
                Some((root, field)) => {
                    let display = match field {
                        None => root.to_string(),
                        Some(f) => {
                            if root == "self" {
                                format!("@{}", f)
                            } else {
                                format!("{}.@{}", root, f)
                            }
                        }
                    };
                    let smt_name = format!("real_{}{}", display, suffix);
                    this.inputs.push(InputBinding {
                        root: root.to_string(),
                        field: field.map(|f| f.to_string()),
                        part,
                        smt_name: smt_name.clone(),
                        display: format!("{}{}", display, suffix),
                        sort: sort.clone(),
                    });
                    this.declare(&smt_name, sort)
                }
                None => {
                    let n = this.fresh_name("sym");
                    this.declare(&n, sort)
                }
            }
        };
        match base {
            BaseName::Class(n) if n == "Integer" => {
                let s = self.int_sort();
                Ok(SymValue::Int(named(self, InputPart::Value, "", s)))
            }
            BaseName::Class(n) if n == "Float" => {
                Ok(SymValue::Real(named(self, InputPart::Value, "", Sort::Real)))
            }
            BaseName::Class(n) if n == "Bool" => {
                Ok(SymValue::Bool(named(self, InputPart::Value, "", Sort::Bool)))
            }
            BaseName::Class(n) if n == "NilClass" => Ok(SymValue::Nil),
            BaseName::Nil => Ok(SymValue::Nil),
            BaseName::Class(n) => self.symbolic_object(n, binding, depth),
            BaseName::Array(elem) => {
                let bound = self.config.array_bound;
                let mut cells = Vec::new();
                for i in 0..bound {
                    let cell = match binding {
                        Some(_) => {
                            let s = self.sort_of_elem(elem)?;
                            let t = named(self, InputPart::Cell(i), &format!("[{}]", i), s);
                            self.leaf_from_term(elem, t)?
                        }
                        None => self.symbolic(elem, None, depth + 1)?,
                    };
                    cells.push(cell);
                }
                let len = named(self, InputPart::Len, ".size", self.int_sort());
                self.background.push(and(
                    int_ge(self.config.int_mode, len.clone(), self.int_lit(0)),
                    int_le(self.config.int_mode, len.clone(), self.int_lit(bound as i64)),
                ));
                let h = self.heap.alloc_array((**elem).clone(), cells, len);
                Ok(SymValue::ArrayRef(h))
            }
            BaseName::Union(members) => {
                let sel = named(self, InputPart::ClassId, ".classid", Sort::Int);
                let mut alts = Vec::new();
                let mut any = Term::fls();
                for m in members {
                    let id = self.class_id_of(m)?;
                    let g = eq(sel.clone(), Term::int(id));
                    any = or(any, g.clone());
                    let v = match binding {
                        Some((root, field)) => {
                            // Distinct payload constants per member.
                            let tag = format!("{}", m).replace(' ', "_");
                            let name = match field {
                                None => format!("{}${}", root, tag),
                                Some(f) => format!("{}.@{}${}", root, f, tag),
                            };
                            let v = self.symbolic(m, Some((&name, None)), depth + 1)?;
                            // Fix up the recorded part for replay.
                            if let Some(last) = self.inputs.last_mut() {
                                if last.root == name {
                                    last.root = root.to_string();
                                    last.field = field.map(|f| f.to_string());
                                    last.part = InputPart::UnionMember(m.clone());
                                }
                            }
                            v
                        }
                        None => self.symbolic(m, None, depth + 1)?,
                    };
                    alts.push((g, v));
                }
                self.background.push(any);
                Ok(SymValue::Union(alts))
            }
        }
    }

    fn sort_of_elem(&self, elem: &BaseName) -> Result<Sort, EncodeError> {
        match elem {
            BaseName::Class(n) if n == "Integer" => Ok(self.int_sort()),
            BaseName::Class(n) if n == "Float" => Ok(Sort::Real),
            BaseName::Class(n) if n == "Bool" => Ok(Sort::Bool),
            other => Err(EncodeError::Unsupported(format!(
                "array element type {} not supported for symbolic arrays",
                other
            ))),
        }
    }

    fn leaf_from_term(&self, base: &BaseName, t: Term) -> Result<SymValue, EncodeError> {
        match base {
            BaseName::Class(n) if n == "Integer" => Ok(SymValue::Int(t)),
            BaseName::Class(n) if n == "Float" => Ok(SymValue::Real(t)),
            BaseName::Class(n) if n == "Bool" => Ok(SymValue::Bool(t)),
            other => Err(EncodeError::Unsupported(format!(
                "unsupported leaf type {}",
                other
            ))),
        }
    }

    fn class_id_of(&self, base: &BaseName) -> Result<i64, EncodeError> {
        let name = match base {
            BaseName::Class(n) => n.as_str(),
            BaseName::Array(_) => "Array",
            BaseName::Nil => "NilClass",
            BaseName::Union(_) => {
                return Err(EncodeError::Unsupported("nested union type".into()))
            }
        };
        self.table
            .class_id(name)
            .ok_or_else(|| EncodeError::Unsupported(format!("unknown class {}", name)))
    }

    /// "A new object with symbolic fields": each declared field is a fresh
    /// symbolic of its declared base type; the object id is a fresh
    /// negative literal, disjoint from every literal allocation.
    fn symbolic_object(
        &mut self,
        class: &str,
        binding: Option<(&str, Option<&str>)>,
        depth: usize,
    ) -> Result<SymValue, EncodeError> {
        if depth > 3 {
            return Err(EncodeError::Unsupported(format!(
                "object nesting too deep for symbolic input of class {}",
                class
            )));
        }
        let fields_decl = self.table.all_fields(class);
        let mut fields = IndexMap::new();
        for (f, base) in &fields_decl {
            let fb = match binding {
                Some((root, None)) => Some((root, Some(f.as_str()))),
                // Fields of nested objects are not model-relevant inputs.
                _ => None,
            };
            let v = self.symbolic(base, fb, depth + 1)?;
            fields.insert(f.clone(), v);
        }
        let id = self.next_sym_id;
        self.next_sym_id -= 1;
        if let Some((root, None)) = binding {
            self.object_ids.push((root.to_string(), BigInt::from(id)));
        }
        let h = self.heap.alloc_object(class.to_string(), fields);
        Ok(SymValue::Obj {
            class: class.to_string(),
            object_id: Term::int(id),
            handle: h,
        })
    }

    // ---- evaluation ----

    fn lookup_def(&self, name: &str) -> Option<&(Vec<String>, IExpr)> {
        self.defs.get(name)
    }

    fn eval(&mut self, e: &IExpr, frame: &mut Frame, path: &Term, depth: usize) -> VResult {
        match e {
            IExpr::Value(c) => Ok(match c {
                Const::Nil => SymValue::Nil,
                Const::True => SymValue::Bool(Term::tru()),
                Const::False => SymValue::Bool(Term::fls()),
                Const::Int(n) => SymValue::Int(self.int_lit(n.clone())),
                Const::Float(s) => SymValue::Real(Term::RealLit(s.clone())),
            }),
            IExpr::ObjectLit { class } => {
                let fields_decl = self.table.all_fields(class);
                let mut fields = IndexMap::new();
                for (f, _) in &fields_decl {
                    fields.insert(f.clone(), SymValue::Nil);
                }
                let id = self.next_obj_id;
                self.next_obj_id += 1;
                let h = self.heap.alloc_object(class.clone(), fields);
                Ok(SymValue::Obj {
                    class: class.clone(),
                    object_id: Term::int(id),
                    handle: h,
                })
            }
            IExpr::Var(n) => Ok(frame
                .env
                .get(n)
                .cloned()
                .unwrap_or(SymValue::Undefined)),
            IExpr::Assign(n, v) => {
                let val = self.eval(v, frame, path, depth)?;
                let live = self.live(path, frame);
                let old = frame.env.get(n).cloned().unwrap_or(SymValue::Undefined);
                let merged = merge(live, val.clone(), old);
                frame.env.insert(n.clone(), merged);
                Ok(val)
            }
            IExpr::If(c, t, els) => {
                let cv = self.eval(c, frame, path, depth)?;
                let cond = self.truthy(&cv);
                let tv = self.eval(t, frame, &and(path.clone(), cond.clone()), depth)?;
                let ev = self.eval(els, frame, &and(path.clone(), not(cond.clone())), depth)?;
                Ok(merge(cond, tv, ev))
            }
            IExpr::Seq(a, b) => {
                self.eval(a, frame, path, depth)?;
                self.eval(b, frame, path, depth)
            }
            IExpr::Let { bindings, body } => {
                for (n, v) in bindings {
                    let val = self.eval(v, frame, path, depth)?;
                    frame.env.insert(n.clone(), val);
                }
                self.eval(body, frame, path, depth)
            }
            IExpr::Funcall { name, args } => self.eval_funcall(name, args, frame, path, depth),
            IExpr::Assert { cond, kind } => {
                let v = self.eval(cond, frame, path, depth)?;
                let live = self.live(path, frame);
                let violated = and(live, not(self.truthy(&v)));
                let ck = match kind {
                    AssertKind::CalleePre { callee } => CheckKind::CalleePre(callee.clone()),
                    AssertKind::NonNil => CheckKind::NonNil,
                };
                self.checks.push((ck, violated));
                Ok(SymValue::Nil)
            }
            IExpr::Assume(cond) => {
                let v = self.eval(cond, frame, path, depth)?;
                let live = self.live(path, frame);
                self.constraints.push(implies(live, self.truthy(&v)));
                Ok(SymValue::Nil)
            }
            IExpr::Return(v) => {
                let val = self.eval(v, frame, path, depth)?;
                let live = self.live(path, frame);
                frame.ret_val = merge(live.clone(), val, frame.ret_val.clone());
                frame.ret_guard = or(frame.ret_guard.clone(), live);
                // Control does not continue past a return; its "value" is
                // only seen by merges, which absorb Undefined.
                Ok(SymValue::Undefined)
            }
            IExpr::Havoc { target, field } => {
                let tv = frame
                    .env
                    .get(target)
                    .cloned()
                    .unwrap_or(SymValue::Undefined);
                let live = self.live(path, frame);
                for (g, alt) in tv.alternatives(Term::tru()) {
                    if let SymValue::Obj { class, handle, .. } = alt {
                        let base = self
                            .table
                            .all_fields(&class)
                            .get(field)
                            .cloned()
                            .ok_or_else(|| {
                                EncodeError::Unsupported(format!(
                                    "havoc of undeclared field @{} on {}",
                                    field, class
                                ))
                            })?;
                        let fresh = self.symbolic(&base, None, 0)?;
                        let old = self.heap.objects[handle].fields[field].clone();
                        let merged = merge(and(live.clone(), g.clone()), fresh, old);
                        self.heap.objects[handle]
                            .fields
                            .insert(field.clone(), merged);
                    }
                }
                Ok(SymValue::Nil)
            }
            IExpr::FieldAssign {
                target,
                field,
                value,
            } => {
                let val = self.eval(value, frame, path, depth)?;
                let tv = frame
                    .env
                    .get(target)
                    .cloned()
                    .unwrap_or(SymValue::Undefined);
                let live = self.live(path, frame);
                for (g, alt) in tv.alternatives(Term::tru()) {
                    match alt {
                        SymValue::Obj { handle, class, .. } => {
                            let old = self.heap.objects[handle]
                                .fields
                                .get(field)
                                .cloned()
                                .ok_or_else(|| {
                                    EncodeError::Unsupported(format!(
                                        "write to undeclared field @{} on {}",
                                        field, class
                                    ))
                                })?;
                            let merged = merge(and(live.clone(), g.clone()), val.clone(), old);
                            self.heap.objects[handle]
                                .fields
                                .insert(field.clone(), merged);
                        }
                        SymValue::Nil => {
                            self.checks
                                .push((CheckKind::NonNil, and(live.clone(), g)));
                        }
                        _ => {}
                    }
                }
                Ok(val)
            }
            IExpr::FieldRead { target, field } => {
                let tv = frame
                    .env
                    .get(target)
                    .cloned()
                    .unwrap_or(SymValue::Undefined);
                let live = self.live(path, frame);
                let mut acc = SymValue::Undefined;
                for (g, alt) in tv.alternatives(Term::tru()) {
                    match alt {
                        SymValue::Obj { handle, class, .. } => {
                            let v = self.heap.objects[handle]
                                .fields
                                .get(field)
                                .cloned()
                                .ok_or_else(|| {
                                    EncodeError::Unsupported(format!(
                                        "read of undeclared field @{} on {}",
                                        field, class
                                    ))
                                })?;
                            acc = merge(g, v, acc);
                        }
                        SymValue::Nil => {
                            self.checks
                                .push((CheckKind::NonNil, and(live.clone(), g.clone())));
                            acc = merge(g, SymValue::Nil, acc);
                        }
                        _ => {}
                    }
                }
                Ok(acc)
            }
            IExpr::Fail => {
                let live = self.live(path, frame);
                self.raise_guard = or(self.raise_guard.clone(), live);
                Ok(SymValue::Undefined)
            }
            IExpr::Fresh(base) => self.symbolic(base, None, 0),
            IExpr::ArrayLit(items) => {
                let bound = self.config.array_bound;
                if items.len() > bound {
                    let violated = self.live(path, frame);
                    self.checks.push((CheckKind::Capacity, violated));
                }
                let mut cells = Vec::new();
                for it in items.iter().take(bound) {
                    cells.push(self.eval(it, frame, path, depth)?);
                }
                while cells.len() < bound {
                    cells.push(SymValue::Nil);
                }
                let len = self.int_lit(items.len().min(bound) as i64);
                let h = self
                    .heap
                    .alloc_array(BaseName::Class("Object".into()), cells, len);
                Ok(SymValue::ArrayRef(h))
            }
        }
    }

    fn eval_funcall(
        &mut self,
        name: &str,
        args: &[IExpr],
        frame: &mut Frame,
        path: &Term,
        depth: usize,
    ) -> VResult {
        let mut vals = Vec::new();
        for a in args {
            vals.push(self.eval(a, frame, path, depth)?);
        }
        // Uninterpreted (pure) methods.
        if let Some((owner, method, singleton)) = self.state.pure_entries.get(name).cloned() {
            return self.eval_uf(name, &owner, &method, singleton, vals);
        }
        // Exact funcDefs: inline with a fresh frame.
        if let Some((params, body)) = self.lookup_def(name).cloned() {
            if depth + 1 > self.config.inline_depth {
                return Err(EncodeError::DepthExceeded);
            }
            let mut callee = Frame::new();
            for (p, v) in params.iter().zip(vals) {
                callee.env.insert(p.clone(), v);
            }
            let live = self.live(path, frame);
            let normal = self.eval(&body, &mut callee, &live, depth + 1)?;
            return Ok(merge(callee.ret_guard, callee.ret_val, normal));
        }
        self.eval_builtin(name, vals, frame, path)
    }

    fn eval_uf(
        &mut self,
        name: &str,
        owner: &str,
        method: &str,
        singleton: bool,
        vals: Vec<SymValue>,
    ) -> VResult {
        let entry = self
            .table
            .lookup_method(owner, method, singleton)
            .cloned()
            .ok_or_else(|| EncodeError::Unsupported(format!("missing pure method {}", name)))?;
        let sig = entry
            .sig
            .clone()
            .ok_or_else(|| EncodeError::Unsupported(format!("pure method {} has no signature", name)))?;
        let mut arg_terms = Vec::new();
        let mut arg_sorts = Vec::new();
        for v in &vals {
            let (t, s) = self.encode_for_uf(v)?;
            arg_terms.push(t);
            arg_sorts.push(s);
        }
        let (res_sort, wrap_class) = match &sig.result.base {
            BaseName::Class(n) if n == "Integer" => (self.int_sort(), None),
            BaseName::Class(n) if n == "Float" => (Sort::Real, None),
            BaseName::Class(n) if n == "Bool" => (Sort::Bool, None),
            BaseName::Class(n) => (Sort::Int, Some(n.clone())),
            other => {
                return Err(EncodeError::Unsupported(format!(
                    "pure method {} returns unsupported type {}",
                    name, other
                )))
            }
        };
        self.ufs
            .insert(name.to_string(), (arg_sorts, res_sort.clone()));
        let app = Term::Uf(name.to_string(), arg_terms);
        match wrap_class {
            None => Ok(match res_sort {
                Sort::Bool => SymValue::Bool(app),
                Sort::Real => SymValue::Real(app),
                _ => SymValue::Int(app),
            }),
            Some(class) => {
                // Object result: identity is the application term itself, so
                // equal arguments give the identical object (congruence);
                // fields are fresh symbolics of their declared types.
                let fields_decl = self.table.all_fields(&class);
                let mut fields = IndexMap::new();
                for (f, base) in &fields_decl {
                    let v = self.symbolic(base, None, 0)?;
                    fields.insert(f.clone(), v);
                }
                let h = self.heap.alloc_object(class.clone(), fields);
                Ok(SymValue::Obj {
                    class,
                    object_id: app,
                    handle: h,
                })
            }
        }
    }

    /// Encode a value as a UF argument: objects go by object id.
    fn encode_for_uf(&mut self, v: &SymValue) -> Result<(Term, Sort), EncodeError> {
        match v {
            SymValue::Bool(t) => Ok((t.clone(), Sort::Bool)),
            SymValue::Int(t) => Ok((t.clone(), self.int_sort())),
            SymValue::Real(t) => Ok((t.clone(), Sort::Real)),
            SymValue::Obj { object_id, .. } => Ok((object_id.clone(), Sort::Int)),
            SymValue::Nil => Ok((Term::int(0), Sort::Int)),
            SymValue::Union(alts) => {
                let mut parts: Vec<(Term, Term, Sort)> = Vec::new();
                for (g, a) in alts {
                    let (t, s) = self.encode_for_uf(a)?;
                    parts.push((g.clone(), t, s));
                }
                let sort = parts[0].2.clone();
                if parts.iter().any(|(_, _, s)| *s != sort) {
                    return Err(EncodeError::Unsupported(
                        "mixed-sort union as pure-method argument".into(),
                    ));
                }
                let mut it = parts.into_iter().rev();
                let (_, last, _) = it.next().unwrap();
                let t = it.fold(last, |acc, (g, t, _)| ite(g, t, acc));
                Ok((t, sort))
            }
            other => Err(EncodeError::Unsupported(format!(
                "{} as pure-method argument",
                other.kind_name()
            ))),
        }
    }

    // ---- truthiness & equality ----

    pub fn truthy(&self, v: &SymValue) -> Term {
        match v {
            SymValue::Nil | SymValue::Undefined => Term::fls(),
            SymValue::Bool(t) => t.clone(),
            SymValue::Int(_) | SymValue::Real(_) | SymValue::Obj { .. } | SymValue::ArrayRef(_) => {
                Term::tru()
            }
            SymValue::Union(alts) => or_all(
                alts.iter()
                    .map(|(g, a)| and(g.clone(), self.truthy(a))),
            ),
        }
    }

    /// Equality with kind separation: values of different kinds are never
    /// equal (notably `Integer` vs `Float`, a documented divergence from
    /// Ruby's `1 == 1.0`). Objects compare by identity.
    fn eq_values(&self, a: &SymValue, b: &SymValue) -> Term {
        let mut out = Term::fls();
        for (ga, va) in a.alternatives(Term::tru()) {
            for (gb, vb) in b.alternatives(Term::tru()) {
                let e = match (&va, &vb) {
                    (SymValue::Nil, SymValue::Nil) => Term::tru(),
                    (SymValue::Bool(x), SymValue::Bool(y)) => eq(x.clone(), y.clone()),
                    (SymValue::Int(x), SymValue::Int(y)) => eq(x.clone(), y.clone()),
                    (SymValue::Real(x), SymValue::Real(y)) => eq(x.clone(), y.clone()),
                    (SymValue::Obj { class: c1, object_id: i1, .. }, SymValue::Obj { class: c2, object_id: i2, .. }) => {
                        if c1 == c2 {
                            eq(i1.clone(), i2.clone())
                        } else {
                            Term::fls()
                        }
                    }
                    (SymValue::ArrayRef(h1), SymValue::ArrayRef(h2)) => Term::BoolLit(h1 == h2),
                    _ => Term::fls(),
                };
                out = or(out, and(ga.clone(), and(gb.clone(), e)));
            }
        }
        out
    }

    // ---- builtins ----

    fn eval_builtin(
        &mut self,
        name: &str,
        mut vals: Vec<SymValue>,
        frame: &mut Frame,
        path: &Term,
    ) -> VResult {
        match name {
            "==" => {
                let b = vals.remove(1);
                let a = vals.remove(0);
                Ok(SymValue::Bool(self.eq_values(&a, &b)))
            }
            "!=" => {
                let b = vals.remove(1);
                let a = vals.remove(0);
                Ok(SymValue::Bool(not(self.eq_values(&a, &b))))
            }
            "nil?" => {
                let a = &vals[0];
                let t = or_all(
                    a.alternatives(Term::tru())
                        .into_iter()
                        .filter(|(_, v)| matches!(v, SymValue::Nil))
                        .map(|(g, _)| g),
                );
                Ok(SymValue::Bool(t))
            }
            "classid" => {
                let a = &vals[0];
                let mut acc: Option<Term> = None;
                for (g, v) in a.alternatives(Term::tru()) {
                    let id = match &v {
                        SymValue::Nil => NILCLASS_ID,
                        SymValue::Bool(_) => crate::typesys::BOOL_ID,
                        SymValue::Int(_) => crate::typesys::INTEGER_ID,
                        SymValue::Real(_) => crate::typesys::FLOAT_ID,
                        SymValue::ArrayRef(_) => crate::typesys::ARRAY_ID,
                        SymValue::Obj { class, .. } => self.table.class_id(class).unwrap_or(0),
                        SymValue::Union(_) | SymValue::Undefined => 0,
                    };
                    let idt = self.int_lit(id);
                    acc = Some(match acc {
                        None => idt,
                        Some(prev) => ite(g, idt, prev),
                    });
                }
                Ok(SymValue::Int(acc.unwrap_or_else(|| self.int_lit(0))))
            }
            "+" | "-" | "*" => self.arith(name, vals),
            "/" => self.division(vals, frame, path),
            "-@" => {
                let a = vals.remove(0);
                match self.num_alts(&a)? {
                    NumVal::Int(t) => Ok(SymValue::Int(self.int_neg(t))),
                    NumVal::Real(t) => Ok(SymValue::Real(Term::App(Op::Neg, vec![t]))),
                    NumVal::Mixed(alts) => {
                        let mut acc = SymValue::Undefined;
                        for (g, k) in alts {
                            let v = match k {
                                NumLeaf::Int(t) => SymValue::Int(self.int_neg(t)),
                                NumLeaf::Real(t) => SymValue::Real(Term::App(Op::Neg, vec![t])),
                            };
                            acc = merge(g, v, acc);
                        }
                        Ok(acc)
                    }
                }
            }
            "<" | "<=" | ">" | ">=" => self.compare(name, vals),
            "get" | "set" | "push" | "size" | "include?" => {
                self.array_op(name, vals, frame, path)
            }
            other => Err(EncodeError::Unsupported(format!(
                "unresolved funcall target `{}`",
                other
            ))),
        }
    }

    fn int_neg(&self, t: Term) -> Term {
        match self.config.int_mode {
            IntMode::Int => Term::App(Op::Neg, vec![t]),
            IntMode::Bv(_) => Term::App(Op::BvNeg, vec![t]),
        }
    }

    /// Numeric operands: (guard, kind, term) triples with Int -> Real
    /// coercion decided per pairing.
    fn num_alts(&self, v: &SymValue) -> Result<NumVal, EncodeError> {
        let alts = v.alternatives(Term::tru());
        if alts.len() == 1 {
            match &alts[0].1 {
                SymValue::Int(t) => return Ok(NumVal::Int(t.clone())),
                SymValue::Real(t) => return Ok(NumVal::Real(t.clone())),
                other => {
                    return Err(EncodeError::Unsupported(format!(
                        "arithmetic on {}",
                        other.kind_name()
                    )))
                }
            }
        }
        let mut out = Vec::new();
        for (g, a) in alts {
            match a {
                SymValue::Int(t) => out.push((g, NumLeaf::Int(t))),
                SymValue::Real(t) => out.push((g, NumLeaf::Real(t))),
                other => {
                    return Err(EncodeError::Unsupported(format!(
                        "arithmetic on {}",
                        other.kind_name()
                    )))
                }
            }
        }
        Ok(NumVal::Mixed(out))
    }

    fn to_real(&self, t: Term) -> Result<Term, EncodeError> {
        match self.config.int_mode {
            IntMode::Int => Ok(Term::App(Op::ToReal, vec![t])),
            IntMode::Bv(_) => Err(EncodeError::Unsupported(
                "mixed integer/float arithmetic in bitvector mode".into(),
            )),
        }
    }

    fn arith(&mut self, op: &str, mut vals: Vec<SymValue>) -> VResult {
        let b = vals.remove(1);
        let a = vals.remove(0);
        let (na, nb) = (self.num_alts(&a)?, self.num_alts(&b)?);
        self.arith_nums(op, na, nb)
    }

    fn arith_nums(&mut self, op: &str, na: NumVal, nb: NumVal) -> VResult {
        match (na, nb) {
            (NumVal::Int(x), NumVal::Int(y)) => {
                let o = match (op, self.config.int_mode) {
                    ("+", IntMode::Int) => Op::Add,
                    ("-", IntMode::Int) => Op::Sub,
                    ("*", IntMode::Int) => Op::Mul,
                    ("+", IntMode::Bv(_)) => Op::BvAdd,
                    ("-", IntMode::Bv(_)) => Op::BvSub,
                    ("*", IntMode::Bv(_)) => Op::BvMul,
                    _ => unreachable!(),
                };
                Ok(SymValue::Int(Term::App(o, vec![x, y])))
            }
            (NumVal::Real(x), NumVal::Real(y)) => {
                let o = match op {
                    "+" => Op::Add,
                    "-" => Op::Sub,
                    "*" => Op::Mul,
                    _ => unreachable!(),
                };
                Ok(SymValue::Real(Term::App(o, vec![x, y])))
            }
            (NumVal::Int(x), NumVal::Real(y)) => {
                let x = self.to_real(x)?;
                self.arith_nums(op, NumVal::Real(x), NumVal::Real(y))
            }
            (NumVal::Real(x), NumVal::Int(y)) => {
                let y = self.to_real(y)?;
                self.arith_nums(op, NumVal::Real(x), NumVal::Real(y))
            }
            (NumVal::Mixed(alts), other) => {
                let mut acc = SymValue::Undefined;
                for (g, leaf) in alts {
                    let v = self.arith_nums(op, leaf.into(), other.clone())?;
                    acc = merge(g, v, acc);
                }
                Ok(acc)
            }
            (other, NumVal::Mixed(alts)) => {
                let mut acc = SymValue::Undefined;
                for (g, leaf) in alts {
                    let v = self.arith_nums(op, other.clone(), leaf.into())?;
                    acc = merge(g, v, acc);
                }
                Ok(acc)
            }
        }
    }

    /// Ruby `/`: floor division on integers (with a division-by-zero
    /// obligation), real division on floats.
    fn division(&mut self, mut vals: Vec<SymValue>, frame: &Frame, path: &Term) -> VResult {
        let b = vals.remove(1);
        let a = vals.remove(0);
        let (na, nb) = (self.num_alts(&a)?, self.num_alts(&b)?);
        self.division_nums(na, nb, frame, path)
    }

    fn division_nums(&mut self, na: NumVal, nb: NumVal, frame: &Frame, path: &Term) -> VResult {
        match (na, nb) {
            (NumVal::Int(x), NumVal::Int(y)) => {
                let live = self.live(path, frame);
                let zero = self.int_lit(0);
                self.checks.push((
                    CheckKind::CalleePre("/".into()),
                    and(live, eq(y.clone(), zero.clone())),
                ));
                Ok(SymValue::Int(self.floor_div(x, y)))
            }
            (NumVal::Real(x), NumVal::Real(y)) => {
                Ok(SymValue::Real(Term::App(Op::RealDiv, vec![x, y])))
            }
            (NumVal::Int(x), NumVal::Real(y)) => {
                let x = self.to_real(x)?;
                self.division_nums(NumVal::Real(x), NumVal::Real(y), frame, path)
            }
            (NumVal::Real(x), NumVal::Int(y)) => {
                let y = self.to_real(y)?;
                self.division_nums(NumVal::Real(x), NumVal::Real(y), frame, path)
            }
            (NumVal::Mixed(alts), other) => {
                let mut acc = SymValue::Undefined;
                for (g, leaf) in alts {
                    let v = self.division_nums(leaf.into(), other.clone(), frame, path)?;
                    acc = merge(g, v, acc);
                }
                Ok(acc)
            }
            (other, NumVal::Mixed(alts)) => {
                let mut acc = SymValue::Undefined;
                for (g, leaf) in alts {
                    let v = self.division_nums(other.clone(), leaf.into(), frame, path)?;
                    acc = merge(g, v, acc);
                }
                Ok(acc)
            }
        }
    }

    /// Floor division. SMT `div` is Euclidean (equals floor for positive
    /// divisors); bitvector `bvsdiv` truncates toward zero. Both are
    /// adjusted to Ruby's floor semantics.
    fn floor_div(&self, x: Term, y: Term) -> Term {
        match self.config.int_mode {
            IntMode::Int => {
                let d = Term::App(Op::IntDiv, vec![x.clone(), y.clone()]);
                let m = Term::App(Op::Mod, vec![x, y.clone()]);
                ite(
                    Term::App(Op::Gt, vec![y, Term::int(0)]),
                    d.clone(),
                    ite(
                        eq(m, Term::int(0)),
                        d.clone(),
                        Term::App(Op::Sub, vec![d, Term::int(1)]),
                    ),
                )
            }
            IntMode::Bv(w) => {
                let q = Term::App(Op::BvSdiv, vec![x.clone(), y.clone()]);
                let r = Term::App(Op::BvSrem, vec![x.clone(), y.clone()]);
                let zero = Term::BvLit(BigInt::from(0), w);
                let signs_differ = eq(
                    Term::App(Op::BvSlt, vec![x, zero.clone()]),
                    Term::App(Op::BvSlt, vec![y, zero.clone()]),
                );
                ite(
                    and(not(signs_differ), not(eq(r, zero))),
                    Term::App(Op::BvSub, vec![q.clone(), Term::BvLit(BigInt::from(1), w)]),
                    q,
                )
            }
        }
    }

    fn compare(&mut self, op: &str, mut vals: Vec<SymValue>) -> VResult {
        let b = vals.remove(1);
        let a = vals.remove(0);
        let (na, nb) = (self.num_alts(&a)?, self.num_alts(&b)?);
        let t = self.compare_nums(op, na, nb)?;
        Ok(SymValue::Bool(t))
    }

    fn compare_nums(&mut self, op: &str, na: NumVal, nb: NumVal) -> Result<Term, EncodeError> {
        match (na, nb) {
            (NumVal::Int(x), NumVal::Int(y)) => Ok(self.int_cmp(op, x, y)),
            (NumVal::Real(x), NumVal::Real(y)) => {
                let o = match op {
                    "<" => Op::Lt,
                    "<=" => Op::Le,
                    ">" => Op::Gt,
                    ">=" => Op::Ge,
                    _ => unreachable!(),
                };
                Ok(Term::App(o, vec![x, y]))
            }
            (NumVal::Int(x), NumVal::Real(y)) => {
                let x = self.to_real(x)?;
                self.compare_nums(op, NumVal::Real(x), NumVal::Real(y))
            }
            (NumVal::Real(x), NumVal::Int(y)) => {
                let y = self.to_real(y)?;
                self.compare_nums(op, NumVal::Real(x), NumVal::Real(y))
            }
            (NumVal::Mixed(alts), other) => {
                let mut acc = Term::fls();
                for (g, leaf) in alts {
                    let t = self.compare_nums(op, leaf.into(), other.clone())?;
                    acc = or(acc, and(g, t));
                }
                Ok(acc)
            }
            (other, NumVal::Mixed(alts)) => {
                let mut acc = Term::fls();
                for (g, leaf) in alts {
                    let t = self.compare_nums(op, other.clone(), leaf.into())?;
                    acc = or(acc, and(g, t));
                }
                Ok(acc)
            }
        }
    }

    fn int_cmp(&self, op: &str, x: Term, y: Term) -> Term {
        let o = match (op, self.config.int_mode) {
            ("<", IntMode::Int) => Op::Lt,
            ("<=", IntMode::Int) => Op::Le,
            (">", IntMode::Int) => Op::Gt,
            (">=", IntMode::Int) => Op::Ge,
            ("<", IntMode::Bv(_)) => Op::BvSlt,
            ("<=", IntMode::Bv(_)) => Op::BvSle,
            (">", IntMode::Bv(_)) => Op::BvSgt,
            (">=", IntMode::Bv(_)) => Op::BvSge,
            _ => unreachable!(),
        };
        Term::App(o, vec![x, y])
    }

    fn array_op(
        &mut self,
        name: &str,
        mut vals: Vec<SymValue>,
        frame: &Frame,
        path: &Term,
    ) -> VResult {
        let recv = vals.remove(0);
        let handles: Vec<(Term, usize)> = recv
            .alternatives(Term::tru())
            .into_iter()
            .filter_map(|(g, v)| match v {
                SymValue::ArrayRef(h) => Some((g, h)),
                _ => None,
            })
            .collect();
        if handles.is_empty() {
            return Err(EncodeError::Unsupported(format!(
                "array operation `{}` on {}",
                name,
                recv.kind_name()
            )));
        }
        let live = self.live(path, frame);
        let mut result = SymValue::Undefined;
        for (g, h) in handles {
            let gl = and(live.clone(), g.clone());
            let v = match name {
                "size" => SymValue::Int(self.heap.arrays[h].len.clone()),
                "get" => {
                    let idx = self.index_term(&vals[0])?;
                    self.bounds_check(&gl, h, &idx);
                    self.array_read(h, &idx)
                }
                "set" => {
                    let idx = self.index_term(&vals[0])?;
                    self.bounds_check(&gl, h, &idx);
                    let val = vals[1].clone();
                    let bound = self.heap.arrays[h].cells.len();
                    for k in 0..bound {
                        let sel = and(gl.clone(), eq(idx.clone(), self.int_lit(k as i64)));
                        let old = self.heap.arrays[h].cells[k].clone();
                        self.heap.arrays[h].cells[k] = merge(sel, val.clone(), old);
                    }
                    val
                }
                "push" => {
                    let val = vals[0].clone();
                    let len = self.heap.arrays[h].len.clone();
                    let cap = self.int_lit(self.heap.arrays[h].cells.len() as i64);
                    // Overflow is a capacity obligation, not an UNSAFE.
                    self.checks.push((
                        CheckKind::Capacity,
                        and(gl.clone(), not(self.int_cmp("<", len.clone(), cap.clone()))),
                    ));
                    let ok = and(gl.clone(), self.int_cmp("<", len.clone(), cap));
                    let bound = self.heap.arrays[h].cells.len();
                    for k in 0..bound {
                        let sel = and(ok.clone(), eq(len.clone(), self.int_lit(k as i64)));
                        let old = self.heap.arrays[h].cells[k].clone();
                        self.heap.arrays[h].cells[k] = merge(sel, val.clone(), old);
                    }
                    let one = self.int_lit(1);
                    let bumped = match self.config.int_mode {
                        IntMode::Int => Term::App(Op::Add, vec![len.clone(), one]),
                        IntMode::Bv(_) => Term::App(Op::BvAdd, vec![len.clone(), one]),
                    };
                    self.heap.arrays[h].len = ite(ok, bumped, len);
                    SymValue::ArrayRef(h)
                }
                "include?" => {
                    let needle = vals[0].clone();
                    let len = self.heap.arrays[h].len.clone();
                    let mut found = Term::fls();
                    let bound = self.heap.arrays[h].cells.len();
                    for k in 0..bound {
                        let cell = self.heap.arrays[h].cells[k].clone();
                        let in_range = self.int_cmp("<", self.int_lit(k as i64), len.clone());
                        found = or(found, and(in_range, self.eq_values(&cell, &needle)));
                    }
                    SymValue::Bool(found)
                }
                _ => unreachable!(),
            };
            result = merge(g, v, result);
        }
        Ok(result)
    }

    fn index_term(&self, v: &SymValue) -> Result<Term, EncodeError> {
        match v {
            SymValue::Int(t) => Ok(t.clone()),
            other => Err(EncodeError::Unsupported(format!(
                "array index of kind {}",
                other.kind_name()
            ))),
        }
    }

    fn bounds_check(&mut self, guard: &Term, h: usize, idx: &Term) {
        let len = self.heap.arrays[h].len.clone();
        let in_bounds = and(
            self.int_cmp("<=", self.int_lit(0), idx.clone()),
            self.int_cmp("<", idx.clone(), len),
        );
        self.checks
            .push((CheckKind::ArrayBounds, and(guard.clone(), not(in_bounds))));
    }

    fn array_read(&self, h: usize, idx: &Term) -> SymValue {
        let cells = &self.heap.arrays[h].cells;
        let mut acc = cells.first().cloned().unwrap_or(SymValue::Nil);
        for (k, cell) in cells.iter().enumerate().skip(1) {
            acc = merge(eq(idx.clone(), self.int_lit(k as i64)), cell.clone(), acc);
        }
        acc
    }
}

#[derive(Clone)]
enum NumVal {
    Int(Term),
    Real(Term),
    Mixed(Vec<(Term, NumLeaf)>),
}

#[derive(Clone)]
enum NumLeaf {
    Int(Term),
    Real(Term),
}

impl From<NumLeaf> for NumVal {
    fn from(l: NumLeaf) -> NumVal {
        match l {
            NumLeaf::Int(t) => NumVal::Int(t),
            NumLeaf::Real(t) => NumVal::Real(t),
        }
    }
}

fn int_ge(mode: IntMode, a: Term, b: Term) -> Term {
    match mode {
        IntMode::Int => Term::App(Op::Ge, vec![a, b]),
        IntMode::Bv(_) => Term::App(Op::BvSge, vec![a, b]),
    }
}

fn int_le(mode: IntMode, a: Term, b: Term) -> Term {
    match mode {
        IntMode::Int => Term::App(Op::Le, vec![a, b]),
        IntMode::Bv(_) => Term::App(Op::BvSle, vec![a, b]),
    }
}

pub fn wrap_bv(n: BigInt, w: u32) -> BigInt {
    let modulus = BigInt::from(1) << w;
    ((n % &modulus) + &modulus) % modulus
}

/// Encode one verification query: declare symbolic inputs, assume the
/// parameter refinements, run the subject, negate the guarantee.
pub fn encode_query(
    table: &ClassTable,
    state: &GlobalState,
    config: &Config,
    query: &VerificationQuery,
) -> Result<QueryEncoding, EncodeError> {
    let mut ev = Evaluator::new(table, state, config);
    for d in &query.defs {
        if let IDef::FuncDef { name, params, body } = d {
            ev.defs
                .insert(name.clone(), (params.clone(), body.clone()));
        }
    }
    let mut frame = Frame::new();
    for d in &query.sym_inputs {
        let IDef::SymDef { name, base } = d else { continue };
        let v = ev.symbolic(base, Some((name, None)), 0)?;
        frame.env.insert(name.clone(), v);
    }
    let path = Term::tru();
    let mut assumptions = Vec::new();
    for a in &query.assumptions {
        let v = ev.eval(a, &mut frame, &path, 0)?;
        assumptions.push(ev.truthy(&v));
    }
    let call_v = ev.eval(&query.call, &mut frame, &path, 0)?;
    frame.env.insert(query.result_binder.clone(), call_v);
    let g_v = ev.eval(&query.guarantee, &mut frame, &path, 0)?;
    let guarantee = ev.truthy(&g_v);

    let background = and(and_all(ev.background.clone()), and_all(ev.constraints.clone()));
    Ok(QueryEncoding {
        decls: ev.decls.into_iter().collect(),
        ufs: ev
            .ufs
            .into_iter()
            .map(|(n, (a, r))| (n, a, r))
            .collect(),
        background,
        assumptions: and_all(assumptions),
        guarantee,
        raise_cond: ev.raise_guard,
        checks: ev.checks,
        inputs: ev.inputs,
        object_ids: ev.object_ids,
    })
}
