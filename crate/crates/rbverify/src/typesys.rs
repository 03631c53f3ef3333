//! Class table construction and the flow-insensitive base type checker that
//! runs before translation. Types here are coarse (class names, unions,
//! nil); refinements are not interpreted at this stage.

use crate::syntax::ast::*;
use crate::syntax::{line_col, ParseError};
use indexmap::IndexMap;
use thiserror::Error;

/// Class ids for the built-in classes. User classes are numbered from
/// `FIRST_USER_CLASS_ID` in declaration order.
pub const INTEGER_ID: i64 = 1;
pub const FLOAT_ID: i64 = 2;
pub const BOOL_ID: i64 = 3;
pub const NILCLASS_ID: i64 = 4;
pub const ARRAY_ID: i64 = 5;
pub const FIRST_USER_CLASS_ID: i64 = 6;

pub const BUILTIN_CLASSES: &[(&str, i64)] = &[
    ("Integer", INTEGER_ID),
    ("Float", FLOAT_ID),
    ("Bool", BOOL_ID),
    ("NilClass", NILCLASS_ID),
    ("Array", ARRAY_ID),
];

/// Where a method entry came from; generated entries are skipped when
/// generator expansion runs twice (idempotence).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    UserDef,
    Annotation,
    Generated,
}

#[derive(Debug, Clone)]
pub struct MethodEntry {
    pub owner: String,
    pub name: String,
    pub singleton: bool,
    pub params: Vec<String>,
    /// Absent for bodies with no annotation anywhere (they can still be
    /// called exactly or get a signature from a mixin obligation).
    pub sig: Option<MethodSignature>,
    pub label: Label,
    pub verify_label: Option<String>,
    pub body: Option<Expr>,
    pub origin: Origin,
    pub span: Span,
}

impl MethodEntry {
    /// Key as it appears in reports and SMT manglings: `Owner_method`,
    /// with `Owner_cls_method` for singleton methods.
    pub fn mangled(&self) -> String {
        mangle(&self.owner, &self.name, self.singleton)
    }
}

pub fn mangle(owner: &str, method: &str, singleton: bool) -> String {
    if singleton {
        format!("{}_cls_{}", owner, method)
    } else {
        format!("{}_{}", owner, method)
    }
}

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub name: String,
    pub id: i64,
    pub is_module: bool,
    pub super_name: Option<String>,
    pub includes: Vec<String>,
    /// Declared instance-variable types, declaration order.
    pub fields: IndexMap<String, BaseName>,
    /// (name, singleton) -> entry, declaration order.
    pub methods: IndexMap<(String, bool), MethodEntry>,
    /// Generator directives (`attr_accessor`, `belongs_to`) awaiting
    /// expansion, in declaration order.
    pub generators: Vec<Decl>,
    pub span: Span,
}

impl ClassInfo {
    pub fn method(&self, name: &str, singleton: bool) -> Option<&MethodEntry> {
        self.methods.get(&(name.to_string(), singleton))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassTable {
    pub classes: IndexMap<String, ClassInfo>,
}

impl ClassTable {
    pub fn get(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.get(name)
    }

    pub fn class_id(&self, name: &str) -> Option<i64> {
        self.classes.get(name).map(|c| c.id)
    }

    /// All declared fields of `class`, including inherited ones.
    /// Superclass fields come first so layouts are stable.
    pub fn all_fields(&self, class: &str) -> IndexMap<String, BaseName> {
        let mut chain = Vec::new();
        let mut cur = Some(class.to_string());
        while let Some(name) = cur {
            if let Some(info) = self.classes.get(&name) {
                chain.push(name.clone());
                cur = info.super_name.clone();
            } else {
                break;
            }
        }
        let mut out = IndexMap::new();
        for name in chain.iter().rev() {
            let info = &self.classes[name];
            for inc in &info.includes {
                if let Some(m) = self.classes.get(inc) {
                    for (f, t) in &m.fields {
                        out.insert(f.clone(), t.clone());
                    }
                }
            }
            for (f, t) in &info.fields {
                out.insert(f.clone(), t.clone());
            }
        }
        out
    }

    /// Method lookup order: the class itself, its included modules in
    /// reverse include order, then the superclass chain.
    pub fn lookup_method(&self, class: &str, name: &str, singleton: bool) -> Option<&MethodEntry> {
        let mut cur = Some(class.to_string());
        while let Some(cname) = cur {
            let info = self.classes.get(&cname)?;
            if let Some(e) = info.method(name, singleton) {
                return Some(e);
            }
            for inc in info.includes.iter().rev() {
                if let Some(m) = self.classes.get(inc) {
                    if let Some(e) = m.method(name, singleton) {
                        return Some(e);
                    }
                }
            }
            cur = info.super_name.clone();
        }
        None
    }

    /// Concrete classes (never modules) that could stand behind `base`,
    /// in class-id order. Used for union-receiver dispatch.
    pub fn dispatch_classes(&self, base: &BaseName) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_dispatch(base, &mut out);
        out.sort_by_key(|n| self.class_id(n).unwrap_or(i64::MAX));
        out.dedup();
        out
    }

    fn collect_dispatch(&self, base: &BaseName, out: &mut Vec<String>) {
        match base {
            BaseName::Class(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            BaseName::Array(_) => {
                if !out.contains(&"Array".to_string()) {
                    out.push("Array".to_string());
                }
            }
            BaseName::Nil => {
                if !out.contains(&"NilClass".to_string()) {
                    out.push("NilClass".to_string());
                }
            }
            BaseName::Union(ms) => {
                for m in ms {
                    self.collect_dispatch(m, out);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum TypeError {
    #[error("unknown superclass `{super_name}` of `{class}`")]
    UnknownSuperclass {
        class: String,
        super_name: String,
        span: Span,
    },
    #[error("unknown module `{module}` included by `{class}`")]
    UnknownModule {
        class: String,
        module: String,
        span: Span,
    },
    #[error("conflicting types for field `@{field}` in `{class}`: `{first}` vs `{second}`")]
    ConflictingFieldType {
        class: String,
        field: String,
        first: String,
        second: String,
        span: Span,
    },
    #[error("annotation for `{method}` in `{owner}` has no definition and no :pure or modifies label")]
    LabelError {
        owner: String,
        method: String,
        span: Span,
    },
    #[error("annotation for undefined method `{method}` in `{owner}`")]
    UnknownAnnotated {
        owner: String,
        method: String,
        span: Span,
    },
    #[error("no declared type for field `@{field}` in `{class}`")]
    NoTypeForField {
        class: String,
        field: String,
        span: Span,
    },
    #[error("call to `{method}` on `{recv}` which has no signature")]
    NoSignature {
        recv: String,
        method: String,
        span: Span,
    },
    #[error("no method `{method}` on `{recv}`")]
    UnknownMethod {
        recv: String,
        method: String,
        span: Span,
    },
    #[error("`{method}` on `{recv}` takes {expected} arguments, got {got}")]
    ArityMismatch {
        recv: String,
        method: String,
        expected: usize,
        got: usize,
        span: Span,
    },
    #[error("type mismatch: expected `{expected}`, got `{got}`")]
    TypeMismatch {
        expected: String,
        got: String,
        span: Span,
    },
    #[error("method `{method}` in `{owner}`: signature has {expected} parameters but the definition has {got}")]
    SignatureArity {
        owner: String,
        method: String,
        expected: usize,
        got: usize,
        span: Span,
    },
    #[error("refinement predicate in `{owner}#{method}` calls `{callee}`, which is neither pure nor exact-with-pure-body")]
    ImpureRefinement {
        owner: String,
        method: String,
        callee: String,
        span: Span,
    },
    #[error("unknown class `{class}`")]
    UnknownClass { class: String, span: Span },
    #[error("cannot resolve call to `{method}` on an untyped receiver")]
    UntypedCall { method: String, span: Span },
    #[error("modifies target `{target}` of `{owner}#{method}` is not `self` or a parameter")]
    BadModifiesTarget {
        owner: String,
        method: String,
        target: String,
        span: Span,
    },
    #[error("{0}")]
    Parse(#[from] ParseError),
}

impl TypeError {
    pub fn span(&self) -> Span {
        match self {
            TypeError::UnknownSuperclass { span, .. }
            | TypeError::UnknownModule { span, .. }
            | TypeError::ConflictingFieldType { span, .. }
            | TypeError::LabelError { span, .. }
            | TypeError::UnknownAnnotated { span, .. }
            | TypeError::NoTypeForField { span, .. }
            | TypeError::NoSignature { span, .. }
            | TypeError::UnknownMethod { span, .. }
            | TypeError::ArityMismatch { span, .. }
            | TypeError::TypeMismatch { span, .. }
            | TypeError::SignatureArity { span, .. }
            | TypeError::ImpureRefinement { span, .. }
            | TypeError::UnknownClass { span, .. }
            | TypeError::UntypedCall { span, .. }
            | TypeError::BadModifiesTarget { span, .. } => *span,
            TypeError::Parse(e) => e.span(),
        }
    }

    pub fn render(&self, source: &str) -> String {
        let (line, col) = line_col(source, self.span().start);
        format!("{}:{}: {}", line, col, self)
    }
}

/// Build the class table from a parsed program: assign class ids, collect
/// fields, merge annotations into definitions, validate labels.
pub fn build_class_table(prog: &Program) -> Result<ClassTable, TypeError> {
    let mut table = ClassTable::default();
    for (name, id) in BUILTIN_CLASSES {
        table.classes.insert(
            name.to_string(),
            ClassInfo {
                name: name.to_string(),
                id: *id,
                is_module: false,
                super_name: None,
                includes: Vec::new(),
                fields: IndexMap::new(),
                methods: IndexMap::new(),
                generators: Vec::new(),
                span: Span::default(),
            },
        );
    }
    let mut next_id = FIRST_USER_CLASS_ID;
    // First pass: register names so forward references resolve.
    for d in &prog.decls {
        let (name, is_module) = match &d.kind {
            DeclKind::Class { name, .. } => (name, false),
            DeclKind::Module { name, .. } => (name, true),
            _ => continue,
        };
        if table.classes.contains_key(name) {
            // Builtins cannot be reopened; duplicates were rejected at parse.
            return Err(TypeError::UnknownClass {
                class: name.clone(),
                span: d.span,
            });
        }
        table.classes.insert(
            name.clone(),
            ClassInfo {
                name: name.clone(),
                id: next_id,
                is_module,
                super_name: None,
                includes: Vec::new(),
                fields: IndexMap::new(),
                methods: IndexMap::new(),
                generators: Vec::new(),
                span: d.span,
            },
        );
        next_id += 1;
    }
    // Second pass: fill members.
    for d in &prog.decls {
        let (name, super_name, members) = match &d.kind {
            DeclKind::Class {
                name,
                super_name,
                members,
            } => (name, super_name.clone(), members),
            DeclKind::Module { name, members } => (name, None, members),
            _ => continue,
        };
        if let Some(s) = &super_name {
            if !table.classes.contains_key(s) {
                return Err(TypeError::UnknownSuperclass {
                    class: name.clone(),
                    super_name: s.clone(),
                    span: d.span,
                });
            }
        }
        let mut fields: IndexMap<String, BaseName> = IndexMap::new();
        let mut methods: IndexMap<(String, bool), MethodEntry> = IndexMap::new();
        let mut annots: Vec<(String, MethodSignature, Option<Label>, Option<String>, Span)> =
            Vec::new();
        let mut includes = Vec::new();
        let mut generators = Vec::new();
        for m in members {
            match &m.kind {
                DeclKind::VarType { fields: fs, base } => {
                    for f in fs {
                        if let Some(prev) = fields.get(f) {
                            if prev != base {
                                return Err(TypeError::ConflictingFieldType {
                                    class: name.clone(),
                                    field: f.clone(),
                                    first: prev.to_string(),
                                    second: base.to_string(),
                                    span: m.span,
                                });
                            }
                        }
                        fields.insert(f.clone(), base.clone());
                    }
                }
                DeclKind::MethodDef {
                    name: mname,
                    singleton,
                    params,
                    sig,
                    label,
                    verify_label,
                    body,
                } => {
                    if let Some(s) = sig {
                        if s.params.len() != params.len() {
                            return Err(TypeError::SignatureArity {
                                owner: name.clone(),
                                method: mname.clone(),
                                expected: s.params.len(),
                                got: params.len(),
                                span: m.span,
                            });
                        }
                    }
                    methods.insert(
                        (mname.clone(), *singleton),
                        MethodEntry {
                            owner: name.clone(),
                            name: mname.clone(),
                            singleton: *singleton,
                            params: params.clone(),
                            sig: sig.clone(),
                            label: label.clone(),
                            verify_label: verify_label.clone(),
                            body: Some(body.clone()),
                            origin: Origin::UserDef,
                            span: m.span,
                        },
                    );
                }
                DeclKind::MethodAnnot {
                    method,
                    sig,
                    label,
                    verify_label,
                } => {
                    annots.push((
                        method.clone(),
                        sig.clone(),
                        label.clone(),
                        verify_label.clone(),
                        m.span,
                    ));
                }
                DeclKind::Include(module) => includes.push(module.clone()),
                DeclKind::AttrAccessor(_) | DeclKind::Generator { .. } => {
                    generators.push(m.clone())
                }
                _ => {}
            }
        }
        // Merge named annotations into definitions; standalone annotations
        // declare external (pure / modifies) methods.
        for (mname, sig, label, verify_label, span) in annots {
            if let Some(entry) = methods.get_mut(&(mname.clone(), false)) {
                if sig.params.len() != entry.params.len() {
                    return Err(TypeError::SignatureArity {
                        owner: name.clone(),
                        method: mname,
                        expected: sig.params.len(),
                        got: entry.params.len(),
                        span,
                    });
                }
                entry.sig = Some(sig);
                if let Some(l) = label {
                    entry.label = l;
                }
                if verify_label.is_some() {
                    entry.verify_label = verify_label;
                }
            } else {
                let label = match label {
                    Some(Label::Exact) | None => {
                        return Err(TypeError::LabelError {
                            owner: name.clone(),
                            method: mname,
                            span,
                        })
                    }
                    Some(l) => l,
                };
                let params = (0..sig.params.len()).map(|i| sig.params[i].binder.clone()).collect();
                methods.insert(
                    (mname.clone(), false),
                    MethodEntry {
                        owner: name.clone(),
                        name: mname,
                        singleton: false,
                        params,
                        sig: Some(sig),
                        label,
                        verify_label,
                        body: None,
                        origin: Origin::Annotation,
                        span,
                    },
                );
            }
        }
        let info = table.classes.get_mut(name).unwrap();
        info.super_name = super_name;
        info.includes = includes;
        info.fields = fields;
        info.methods = methods;
        info.generators = generators;
    }
    // Validate includes after everything is registered.
    for (name, info) in &table.classes {
        for inc in &info.includes {
            match table.classes.get(inc) {
                Some(m) if m.is_module => {}
                _ => {
                    return Err(TypeError::UnknownModule {
                        class: name.clone(),
                        module: inc.clone(),
                        span: info.span,
                    })
                }
            }
        }
    }
    check_refinement_purity(&table)?;
    Ok(table)
}

/// Refinement predicates may call pure-labeled methods, and exact-labeled
/// methods whose own bodies are free of writes and of calls to anything
/// else impure.
fn check_refinement_purity(table: &ClassTable) -> Result<(), TypeError> {
    for info in table.classes.values() {
        for entry in info.methods.values() {
            let Some(sig) = &entry.sig else { continue };
            for rt in sig.params.iter().chain(std::iter::once(&sig.result)) {
                check_pred_calls(table, info, entry, &rt.predicate)?;
            }
        }
    }
    Ok(())
}

fn check_pred_calls(
    table: &ClassTable,
    owner: &ClassInfo,
    entry: &MethodEntry,
    pred: &Expr,
) -> Result<(), TypeError> {
    let mut result = Ok(());
    walk_expr(pred, &mut |e| {
        if result.is_err() {
            return;
        }
        if let ExprKind::Call { method, .. } = &e.kind {
            if matches!(method.as_str(), "set" | "push" | "<<") {
                result = Err(TypeError::ImpureRefinement {
                    owner: owner.name.clone(),
                    method: entry.name.clone(),
                    callee: method.clone(),
                    span: e.span,
                });
                return;
            }
            if is_builtin_operator(method) {
                return;
            }
            // Receiver classes are not known here (this runs before type
            // checking), so accept the call if any class in the table
            // provides an acceptable version and reject it only when every
            // known version is impure.
            let mut found_any = false;
            let mut found_ok = false;
            for info in table.classes.values() {
                if let Some(callee) = info.method(method, false) {
                    found_any = true;
                    if callee_usable_in_refinement(table, callee, 0) {
                        found_ok = true;
                    }
                }
            }
            if found_any && !found_ok {
                result = Err(TypeError::ImpureRefinement {
                    owner: owner.name.clone(),
                    method: entry.name.clone(),
                    callee: method.clone(),
                    span: e.span,
                });
            }
        }
    });
    result
}

fn callee_usable_in_refinement(table: &ClassTable, callee: &MethodEntry, depth: usize) -> bool {
    if depth > 8 {
        return false;
    }
    match &callee.label {
        Label::Pure => true,
        Label::Modifies(_) => false,
        Label::Exact => match &callee.body {
            None => false,
            Some(body) => {
                let mut ok = true;
                walk_expr(body, &mut |e| match &e.kind {
                    ExprKind::Assign(..)
                    | ExprKind::FieldAssign(..)
                    | ExprKind::New(_)
                    | ExprKind::Raise(_) => ok = false,
                    ExprKind::Call { method, .. } if !is_builtin_operator(method) => {
                        let mut sub_ok = false;
                        let mut any = false;
                        for info in table.classes.values() {
                            if let Some(c) = info.method(method, false) {
                                any = true;
                                if callee_usable_in_refinement(table, c, depth + 1) {
                                    sub_ok = true;
                                }
                            }
                        }
                        if any && !sub_ok {
                            ok = false;
                        }
                    }
                    _ => {}
                });
                ok
            }
        },
    }
}

pub fn is_builtin_operator(method: &str) -> bool {
    matches!(
        method,
        "+" | "-" | "*" | "/" | "-@" | "==" | "!=" | "<" | "<=" | ">" | ">=" | "<<"
            | "get" | "set" | "push" | "size" | "include?" | "classid" | "nil?"
    )
}

/// Static type of an expression: a base name, or unknown (methods without
/// annotations are not rejected, they just lose dispatch precision).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Known(BaseName),
    Untyped,
}

impl Ty {
    pub fn known(&self) -> Option<&BaseName> {
        match self {
            Ty::Known(b) => Some(b),
            Ty::Untyped => None,
        }
    }
}

/// Normalized union join: flattened, deduplicated, declaration-order stable.
pub fn join_base(a: &BaseName, b: &BaseName) -> BaseName {
    let mut members = Vec::new();
    flatten(a, &mut members);
    flatten(b, &mut members);
    if members.len() == 1 {
        members.pop().unwrap()
    } else {
        BaseName::Union(members)
    }
}

fn flatten(b: &BaseName, out: &mut Vec<BaseName>) {
    match b {
        BaseName::Union(ms) => {
            for m in ms {
                flatten(m, out);
            }
        }
        other => {
            if !out.contains(other) {
                out.push(other.clone());
            }
        }
    }
}

pub fn join_ty(a: &Ty, b: &Ty) -> Ty {
    match (a, b) {
        (Ty::Known(x), Ty::Known(y)) => Ty::Known(join_base(x, y)),
        _ => Ty::Untyped,
    }
}

/// `got` may flow where `expected` is required. `nil` is compatible in both
/// directions; `Integer` widens to `Float`; union membership is pointwise.
pub fn compatible(expected: &BaseName, got: &BaseName) -> bool {
    if expected == got {
        return true;
    }
    match (expected, got) {
        (_, BaseName::Nil) | (BaseName::Nil, _) => true,
        (_, BaseName::Class(n)) if n == "NilClass" => true,
        (BaseName::Class(n), _) if n == "NilClass" => true,
        (BaseName::Class(e), BaseName::Class(g)) => e == "Float" && g == "Integer",
        (BaseName::Array(e), BaseName::Array(g)) => compatible(e, g),
        (BaseName::Union(es), BaseName::Union(gs)) => {
            gs.iter().all(|g| es.iter().any(|e| compatible(e, g)))
        }
        (BaseName::Union(es), g) => es.iter().any(|e| compatible(e, g)),
        (e, BaseName::Union(gs)) => gs.iter().all(|g| compatible(e, g)),
        _ => false,
    }
}

pub fn compatible_ty(expected: &BaseName, got: &Ty) -> bool {
    match got {
        Ty::Untyped => true,
        Ty::Known(g) => compatible(expected, g),
    }
}

/// Builtin operator/array signatures. `None` when the name is not builtin
/// for the receiver type.
pub fn builtin_result(recv: &BaseName, method: &str, args: &[Ty]) -> Option<Ty> {
    let is_int = matches!(recv, BaseName::Class(n) if n == "Integer");
    let is_float = matches!(recv, BaseName::Class(n) if n == "Float");
    match method {
        "==" | "!=" | "nil?" => Some(Ty::Known(BaseName::class("Bool"))),
        "classid" => Some(Ty::Known(BaseName::class("Integer"))),
        "+" | "-" | "*" | "/" if is_int || is_float => {
            let arg_float = matches!(
                args.first(),
                Some(Ty::Known(BaseName::Class(n))) if n == "Float"
            );
            if is_float || arg_float {
                Some(Ty::Known(BaseName::class("Float")))
            } else if matches!(args.first(), Some(Ty::Untyped)) {
                Some(Ty::Untyped)
            } else {
                Some(Ty::Known(BaseName::class("Integer")))
            }
        }
        "-@" if is_int => Some(Ty::Known(BaseName::class("Integer"))),
        "-@" if is_float => Some(Ty::Known(BaseName::class("Float"))),
        "<" | "<=" | ">" | ">=" if is_int || is_float => {
            Some(Ty::Known(BaseName::class("Bool")))
        }
        _ => match recv {
            BaseName::Array(elem) => match method {
                "get" => Some(Ty::Known((**elem).clone())),
                "set" => Some(Ty::Known((**elem).clone())),
                "push" | "<<" => Some(Ty::Known(recv.clone())),
                "size" => Some(Ty::Known(BaseName::class("Integer"))),
                "include?" => Some(Ty::Known(BaseName::class("Bool"))),
                _ => None,
            },
            _ => None,
        },
    }
}

pub fn builtin_arity(method: &str) -> usize {
    match method {
        "nil?" | "classid" | "size" | "-@" => 0,
        "set" => 2,
        _ => 1,
    }
}

/// Flow-insensitive environment: every local holds the join of everything
/// ever assigned to it anywhere in the body.
pub struct TypeEnv {
    pub class: String,
    /// Typing a singleton method's body: implicit-self calls resolve to
    /// singleton methods.
    pub singleton: bool,
    pub locals: IndexMap<String, Ty>,
}

/// Check one method body against its signature. Also the workhorse used by
/// the translator to type receivers, via `infer_expr`.
pub fn check_method(table: &ClassTable, entry: &MethodEntry) -> Result<(), TypeError> {
    let Some(body) = &entry.body else {
        return Ok(());
    };
    let mut env = TypeEnv {
        class: entry.owner.clone(),
        singleton: entry.singleton,
        locals: IndexMap::new(),
    };
    match &entry.sig {
        Some(sig) => {
            for (p, rt) in entry.params.iter().zip(&sig.params) {
                env.locals.insert(p.clone(), Ty::Known(rt.base.clone()));
            }
        }
        None => {
            for p in &entry.params {
                env.locals.insert(p.clone(), Ty::Untyped);
            }
        }
    }
    solve_locals(table, &mut env, body)?;
    let mut returns = Vec::new();
    let body_ty = infer_expr(table, &env, body, &mut Some(&mut returns))?;
    if let Some(sig) = &entry.sig {
        let mut all = returns;
        // A trailing `return` means the fallthrough value never matters.
        if !matches!(last_expr(body).kind, ExprKind::Return(_) | ExprKind::Raise(_)) {
            all.push((body_ty, last_expr(body).span));
        }
        for (ty, span) in all {
            if !compatible_ty(&sig.result.base, &ty) {
                return Err(TypeError::TypeMismatch {
                    expected: sig.result.base.to_string(),
                    got: match ty {
                        Ty::Known(b) => b.to_string(),
                        Ty::Untyped => "untyped".to_string(),
                    },
                    span,
                });
            }
        }
    }
    Ok(())
}

fn last_expr(e: &Expr) -> &Expr {
    match &e.kind {
        ExprKind::Seq(_, b) => last_expr(b),
        _ => e,
    }
}

/// Iterate assignment typing to a fixpoint so later reads see the joined
/// type regardless of textual order.
pub fn solve_locals(table: &ClassTable, env: &mut TypeEnv, body: &Expr) -> Result<(), TypeError> {
    for _ in 0..10 {
        let before = env.locals.clone();
        collect_assigns(table, env, body);
        if env.locals == before {
            return Ok(());
        }
    }
    Ok(())
}

fn collect_assigns(table: &ClassTable, env: &mut TypeEnv, e: &Expr) {
    let mut assigns: Vec<(String, Ty)> = Vec::new();
    walk_expr(e, &mut |n| {
        if let ExprKind::Assign(name, rhs) = &n.kind {
            let ty = infer_expr(table, env, rhs, &mut None).unwrap_or(Ty::Untyped);
            assigns.push((name.clone(), ty));
        }
    });
    for (name, ty) in assigns {
        let merged = match env.locals.get(&name) {
            Some(old) => join_ty(old, &ty),
            None => ty,
        };
        env.locals.insert(name, merged);
    }
}

/// Infer the static type of `e`. When `returns` is provided, every
/// `return v` records `v`'s type for result checking.
pub fn infer_expr(
    table: &ClassTable,
    env: &TypeEnv,
    e: &Expr,
    returns: &mut Option<&mut Vec<(Ty, Span)>>,
) -> Result<Ty, TypeError> {
    match &e.kind {
        ExprKind::Const(c) => Ok(Ty::Known(match c {
            Const::Nil => BaseName::Nil,
            Const::True | Const::False => BaseName::class("Bool"),
            Const::Int(_) => BaseName::class("Integer"),
            Const::Float(_) => BaseName::class("Float"),
        })),
        ExprKind::Var(n) => Ok(env.locals.get(n).cloned().unwrap_or(Ty::Untyped)),
        ExprKind::Assign(_, rhs) => infer_expr(table, env, rhs, returns),
        ExprKind::If(c, t, els) => {
            infer_expr(table, env, c, returns)?;
            let tt = infer_expr(table, env, t, returns)?;
            let et = infer_expr(table, env, els, returns)?;
            // A diverging branch (return/raise) does not contribute.
            let t_div = diverges(t);
            let e_div = diverges(els);
            Ok(match (t_div, e_div) {
                (true, true) | (true, false) => et,
                (false, true) => tt,
                (false, false) => join_ty(&tt, &et),
            })
        }
        ExprKind::Seq(a, b) => {
            infer_expr(table, env, a, returns)?;
            infer_expr(table, env, b, returns)
        }
        ExprKind::SelfRef => Ok(Ty::Known(BaseName::Class(env.class.clone()))),
        ExprKind::FieldRead(f) => {
            let fields = table.all_fields(&env.class);
            match fields.get(f) {
                Some(t) => Ok(Ty::Known(t.clone())),
                None => Err(TypeError::NoTypeForField {
                    class: env.class.clone(),
                    field: f.clone(),
                    span: e.span,
                }),
            }
        }
        ExprKind::FieldAssign(f, rhs) => {
            let got = infer_expr(table, env, rhs, returns)?;
            let fields = table.all_fields(&env.class);
            match fields.get(f) {
                Some(t) => {
                    if !compatible_ty(t, &got) {
                        return Err(TypeError::TypeMismatch {
                            expected: t.to_string(),
                            got: match got {
                                Ty::Known(b) => b.to_string(),
                                Ty::Untyped => "untyped".to_string(),
                            },
                            span: e.span,
                        });
                    }
                    Ok(Ty::Known(t.clone()))
                }
                None => Err(TypeError::NoTypeForField {
                    class: env.class.clone(),
                    field: f.clone(),
                    span: e.span,
                }),
            }
        }
        ExprKind::Call {
            recv, method, args, ..
        } => {
            // `assume(e)` intrinsic: restricts verification paths, value nil.
            if method == "assume" && matches!(recv.kind, ExprKind::SelfRef) && args.len() == 1 {
                infer_expr(table, env, &args[0], returns)?;
                return Ok(Ty::Known(BaseName::Nil));
            }
            let recv_ty = infer_expr(table, env, recv, returns)?;
            let mut arg_tys = Vec::new();
            for a in args {
                arg_tys.push(infer_expr(table, env, a, returns)?);
            }
            let singleton = env.singleton && matches!(recv.kind, ExprKind::SelfRef);
            infer_call_with(table, &recv_ty, method, &arg_tys, e.span, singleton)
        }
        ExprKind::New(c) => {
            if table.get(c).is_none() {
                return Err(TypeError::UnknownClass {
                    class: c.clone(),
                    span: e.span,
                });
            }
            Ok(Ty::Known(BaseName::Class(c.clone())))
        }
        ExprKind::Return(v) => {
            let ty = infer_expr(table, env, v, returns)?;
            if let Some(rs) = returns {
                rs.push((ty, v.span));
            }
            Ok(Ty::Known(BaseName::Nil))
        }
        ExprKind::Raise(_) => Ok(Ty::Known(BaseName::Nil)),
        ExprKind::ArrayLit(items) => {
            let mut elem: Option<Ty> = None;
            for it in items {
                let t = infer_expr(table, env, it, returns)?;
                elem = Some(match elem {
                    None => t,
                    Some(prev) => join_ty(&prev, &t),
                });
            }
            Ok(match elem {
                Some(Ty::Known(b)) => Ty::Known(BaseName::Array(Box::new(b))),
                Some(Ty::Untyped) => Ty::Untyped,
                None => Ty::Untyped,
            })
        }
    }
}

fn diverges(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Return(_) | ExprKind::Raise(_) => true,
        ExprKind::Seq(_, b) => diverges(b),
        ExprKind::If(_, t, els) => diverges(t) && diverges(els),
        _ => false,
    }
}

/// Resolve a call's result type given the receiver's static type.
pub fn infer_call(
    table: &ClassTable,
    recv_ty: &Ty,
    method: &str,
    args: &[Ty],
    span: Span,
) -> Result<Ty, TypeError> {
    infer_call_with(table, recv_ty, method, args, span, false)
}

pub fn infer_call_with(
    table: &ClassTable,
    recv_ty: &Ty,
    method: &str,
    args: &[Ty],
    span: Span,
    singleton: bool,
) -> Result<Ty, TypeError> {
    match recv_ty {
        Ty::Untyped => {
            // Unique-definer fallback (class hierarchy analysis style).
            if is_builtin_operator(method) {
                return Ok(Ty::Untyped);
            }
            let defs: Vec<&MethodEntry> = table
                .classes
                .values()
                .filter_map(|c| c.method(method, singleton))
                .collect();
            match defs.len() {
                1 => method_result(defs[0], args, "untyped", method, span),
                _ => Ok(Ty::Untyped),
            }
        }
        Ty::Known(base) => {
            let mut out: Option<Ty> = None;
            for member_class in member_bases(base) {
                let t = infer_call_single(table, &member_class, method, args, span, singleton)?;
                out = Some(match out {
                    None => t,
                    Some(prev) => join_ty(&prev, &t),
                });
            }
            Ok(out.unwrap_or(Ty::Untyped))
        }
    }
}

fn member_bases(base: &BaseName) -> Vec<BaseName> {
    let mut flat = Vec::new();
    flatten(base, &mut flat);
    flat
}

fn infer_call_single(
    table: &ClassTable,
    base: &BaseName,
    method: &str,
    args: &[Ty],
    span: Span,
    singleton: bool,
) -> Result<Ty, TypeError> {
    let class_name = match base {
        BaseName::Class(n) => n.clone(),
        BaseName::Array(_) => "Array".to_string(),
        BaseName::Nil => "NilClass".to_string(),
        BaseName::Union(_) => unreachable!("unions are flattened before dispatch"),
    };
    if table.get(&class_name).is_none() {
        return Err(TypeError::UnknownClass {
            class: class_name,
            span,
        });
    }
    // A user definition shadows the builtin of the same name (e.g. a
    // class-specific `==` or `<<`).
    if let Some(entry) = table.lookup_method(&class_name, method, singleton) {
        return method_result(entry, args, &class_name, method, span);
    }
    if let Some(t) = builtin_result(base, method, args) {
        if args.len() != builtin_arity(method) && !(method == "-@" && args.is_empty()) {
            return Err(TypeError::ArityMismatch {
                recv: base.to_string(),
                method: method.to_string(),
                expected: builtin_arity(method),
                got: args.len(),
                span,
            });
        }
        return Ok(t);
    }
    Err(TypeError::UnknownMethod {
        recv: class_name,
        method: method.to_string(),
        span,
    })
}

fn method_result(
    entry: &MethodEntry,
    args: &[Ty],
    recv_name: &str,
    method: &str,
    span: Span,
) -> Result<Ty, TypeError> {
    if entry.params.len() != args.len() {
        return Err(TypeError::ArityMismatch {
            recv: recv_name.to_string(),
            method: method.to_string(),
            expected: entry.params.len(),
            got: args.len(),
            span,
        });
    }
    match &entry.sig {
        Some(sig) => {
            for (rt, got) in sig.params.iter().zip(args) {
                if !compatible_ty(&rt.base, got) {
                    return Err(TypeError::TypeMismatch {
                        expected: rt.base.to_string(),
                        got: match got {
                            Ty::Known(b) => b.to_string(),
                            Ty::Untyped => "untyped".to_string(),
                        },
                        span,
                    });
                }
            }
            Ok(Ty::Known(sig.result.base.clone()))
        }
        None => Ok(Ty::Untyped),
    }
}
