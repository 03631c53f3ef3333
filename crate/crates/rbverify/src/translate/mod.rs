//! Lowering of annotated methods into the intermediate language and
//! construction of one verification query per method (plus mixin
//! obligations). Exact calls become funcalls of translated definitions;
//! pure calls become uninterpreted functions framed by their specs; impure
//! (modifies) calls havoc exactly the declared fields.

pub mod ir;

use crate::expand::{MissingImplementation, Obligation};
use crate::syntax::ast::*;
use crate::typesys::{
    infer_expr, is_builtin_operator, solve_locals, ClassTable, MethodEntry, Origin,
    TypeEnv, TypeError, Ty,
};
use indexmap::{IndexMap, IndexSet};
use ir::{AssertKind, IDef, IExpr, QueryKind, VerificationQuery};

/// The global states: declared fields Σ_f, uninterpreted methods Σ_p,
/// exactly translated methods Σ_m. Σ_p and Σ_m are disjoint by
/// construction (one label per method).
#[derive(Debug, Clone, Default)]
pub struct GlobalState {
    pub fields: IndexSet<(String, String)>,
    pub pure: IndexSet<String>,
    pub exact: IndexSet<String>,
    /// Uninterpreted-function name -> (owner, method, singleton), for sort
    /// lookup during encoding and interpretation lookup during replay.
    pub pure_entries: IndexMap<String, (String, String, bool)>,
}

/// λ_I name of the uninterpreted function standing for a pure method.
/// Distinct from the funcDef namespace so a method being verified exactly
/// never collides with its own uninterpreted uses.
pub fn uninterp_name(mangled: &str) -> String {
    format!("uninterp%{}", mangled)
}

pub fn infer_state(table: &ClassTable) -> GlobalState {
    let mut st = GlobalState::default();
    for info in table.classes.values() {
        for (f, _) in &info.fields {
            st.fields.insert((info.name.clone(), f.clone()));
        }
        for entry in info.methods.values() {
            let name = entry.mangled();
            match entry.label {
                Label::Pure | Label::Modifies(_) => {
                    st.pure.insert(name.clone());
                    st.pure_entries.insert(
                        uninterp_name(&name),
                        (entry.owner.clone(), entry.name.clone(), entry.singleton),
                    );
                }
                Label::Exact => {
                    st.exact.insert(name);
                }
            }
        }
    }
    debug_assert!(st.pure.intersection(&st.exact).next().is_none());
    st
}

/// One translation outcome per verified method.
#[derive(Debug)]
pub enum Translated {
    Query(VerificationQuery),
    /// Per-method isolation: a translation failure in one method never
    /// aborts the others.
    Error {
        owner: String,
        method: String,
        singleton: bool,
        error: TypeError,
    },
    MissingImpl(MissingImplementation),
}

pub fn translate_program(
    table: &ClassTable,
    obligations: &[Obligation],
    missing: &[MissingImplementation],
) -> Vec<Translated> {
    let mut out = Vec::new();
    for info in table.classes.values() {
        if info.is_module {
            continue;
        }
        let mut subjects: Vec<MethodEntry> = Vec::new();
        for entry in info.methods.values() {
            if entry.origin == Origin::UserDef && entry.body.is_some() && entry.sig.is_some() {
                subjects.push(entry.clone());
            }
        }
        // Module-defined annotated bodies are verified in each including
        // class's context.
        for module_name in &info.includes {
            if let Some(module) = table.get(module_name) {
                for entry in module.methods.values() {
                    if entry.body.is_some() && entry.sig.is_some() {
                        let mut e = entry.clone();
                        e.owner = info.name.clone();
                        subjects.push(e);
                    }
                }
            }
        }
        for entry in subjects {
            let sig = entry.sig.clone().unwrap();
            let mut tr = Translator::new(table);
            match tr.translate_query(&entry, &sig, QueryKind::Method) {
                Ok(q) => out.push(Translated::Query(q)),
                Err(error) => out.push(Translated::Error {
                    owner: entry.owner.clone(),
                    method: entry.name.clone(),
                    singleton: entry.singleton,
                    error,
                }),
            }
        }
    }
    for ob in obligations {
        let Some(info) = table.get(&ob.class) else { continue };
        let Some(base_entry) = info
            .method(&ob.method, false)
            .or_else(|| table.lookup_method(&ob.class, &ob.method, false))
        else {
            continue;
        };
        let mut entry = base_entry.clone();
        entry.owner = ob.class.clone();
        let kind = QueryKind::Obligation {
            module: ob.module.clone(),
        };
        let mut tr = Translator::new(table);
        let res = if entry.params.len() != ob.sig.params.len() {
            Err(TypeError::SignatureArity {
                owner: ob.class.clone(),
                method: ob.method.clone(),
                expected: ob.sig.params.len(),
                got: entry.params.len(),
                span: ob.span,
            })
        } else {
            tr.translate_query(&entry, &ob.sig, kind)
        };
        match res {
            Ok(q) => out.push(Translated::Query(q)),
            Err(error) => out.push(Translated::Error {
                owner: ob.class.clone(),
                method: ob.method.clone(),
                singleton: false,
                error,
            }),
        }
    }
    for m in missing {
        out.push(Translated::MissingImpl(m.clone()));
    }
    out
}

/// Lexical context for one body or predicate being translated.
struct Ctx {
    class: String,
    singleton: bool,
    self_name: String,
    /// Surface name -> IR name (α-renaming of spec binders at call sites).
    rename: IndexMap<String, String>,
    tenv: TypeEnv,
}

impl Ctx {
    fn ir_name(&self, surface: &str) -> String {
        self.rename
            .get(surface)
            .cloned()
            .unwrap_or_else(|| surface.to_string())
    }
}

pub struct Translator<'a> {
    table: &'a ClassTable,
    fresh: u64,
    /// Mangled name -> funcDef; `None` marks in-progress (recursion).
    defs: IndexMap<String, Option<IDef>>,
}

impl<'a> Translator<'a> {
    pub fn new(table: &'a ClassTable) -> Self {
        Translator {
            table,
            fresh: 0,
            defs: IndexMap::new(),
        }
    }

    fn fresh_name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{}%{}", base, self.fresh)
    }

    pub fn translate_query(
        &mut self,
        entry: &MethodEntry,
        sig: &MethodSignature,
        kind: QueryKind,
    ) -> Result<VerificationQuery, TypeError> {
        let mangled = entry.mangled();
        self.ensure_funcdef(entry)?;

        let mut sym_inputs = vec![IDef::SymDef {
            name: "self".to_string(),
            base: BaseName::Class(entry.owner.clone()),
        }];
        for (p, rt) in entry.params.iter().zip(&sig.params) {
            sym_inputs.push(IDef::SymDef {
                name: p.clone(),
                base: rt.base.clone(),
            });
        }

        let mut ctx = Ctx {
            class: entry.owner.clone(),
            singleton: entry.singleton,
            self_name: "self".to_string(),
            rename: IndexMap::new(),
            tenv: TypeEnv {
                class: entry.owner.clone(),
                singleton: entry.singleton,
                locals: IndexMap::new(),
            },
        };
        for (p, rt) in entry.params.iter().zip(&sig.params) {
            ctx.rename.insert(rt.binder.clone(), p.clone());
            ctx.tenv.locals.insert(p.clone(), Ty::Known(rt.base.clone()));
            ctx.tenv
                .locals
                .insert(rt.binder.clone(), Ty::Known(rt.base.clone()));
        }

        let mut assumptions = Vec::new();
        for rt in &sig.params {
            if !rt.is_trivial() {
                assumptions.push(self.translate_expr(&mut ctx, &rt.predicate)?);
            }
        }

        let mut call_args = vec![IExpr::var("self")];
        call_args.extend(entry.params.iter().map(|p| IExpr::var(p.clone())));
        let call = IExpr::call(mangled, call_args);

        let result_binder = "%ret".to_string();
        ctx.rename
            .insert(sig.result.binder.clone(), result_binder.clone());
        ctx.tenv.locals.insert(
            sig.result.binder.clone(),
            Ty::Known(sig.result.base.clone()),
        );
        let guarantee = self.translate_expr(&mut ctx, &sig.result.predicate)?;

        let defs: Vec<IDef> = self
            .defs
            .values()
            .map(|d| d.clone().expect("all funcDefs resolved"))
            .collect();

        Ok(VerificationQuery {
            owner: entry.owner.clone(),
            method: entry.name.clone(),
            singleton: entry.singleton,
            kind,
            sym_inputs,
            assumptions,
            result_binder,
            call,
            guarantee,
            defs,
            sig: sig.clone(),
            verify_label: entry.verify_label.clone(),
        })
    }

    /// Translate an exact method into a funcDef, memoized. Recursion is fine:
    /// the in-progress marker stops re-entry and the evaluator resolves the
    /// name at inline time.
    fn ensure_funcdef(&mut self, entry: &MethodEntry) -> Result<(), TypeError> {
        let mangled = entry.mangled();
        if self.defs.contains_key(&mangled) {
            return Ok(());
        }
        self.defs.insert(mangled.clone(), None);
        let body = entry.body.clone().unwrap_or(Expr::nil());
        let mut ctx = Ctx {
            class: entry.owner.clone(),
            singleton: entry.singleton,
            self_name: "self".to_string(),
            rename: IndexMap::new(),
            tenv: TypeEnv {
                class: entry.owner.clone(),
                singleton: entry.singleton,
                locals: IndexMap::new(),
            },
        };
        match &entry.sig {
            Some(sig) => {
                for (p, rt) in entry.params.iter().zip(&sig.params) {
                    ctx.tenv.locals.insert(p.clone(), Ty::Known(rt.base.clone()));
                }
            }
            None => {
                for p in &entry.params {
                    ctx.tenv.locals.insert(p.clone(), Ty::Untyped);
                }
            }
        }
        solve_locals(self.table, &mut ctx.tenv, &body)?;
        let ibody = self.translate_expr(&mut ctx, &body)?;
        let mut params = vec!["self".to_string()];
        params.extend(entry.params.iter().cloned());
        self.defs.insert(
            mangled.clone(),
            Some(IDef::FuncDef {
                name: mangled,
                params,
                body: ibody,
            }),
        );
        Ok(())
    }

    fn translate_expr(&mut self, ctx: &mut Ctx, e: &Expr) -> Result<IExpr, TypeError> {
        match &e.kind {
            ExprKind::Const(c) => Ok(IExpr::Value(c.clone())),
            ExprKind::Var(n) => Ok(IExpr::Var(ctx.ir_name(n))),
            ExprKind::Assign(n, v) => {
                let tv = self.translate_expr(ctx, v)?;
                if !ctx.tenv.locals.contains_key(n) {
                    ctx.tenv.locals.insert(n.clone(), Ty::Untyped);
                }
                Ok(IExpr::Assign(ctx.ir_name(n), Box::new(tv)))
            }
            ExprKind::If(c, t, els) => Ok(IExpr::If(
                Box::new(self.translate_expr(ctx, c)?),
                Box::new(self.translate_expr(ctx, t)?),
                Box::new(self.translate_expr(ctx, els)?),
            )),
            ExprKind::Seq(a, b) => Ok(IExpr::seq(
                self.translate_expr(ctx, a)?,
                self.translate_expr(ctx, b)?,
            )),
            ExprKind::SelfRef => Ok(IExpr::var(ctx.self_name.clone())),
            ExprKind::FieldRead(f) => {
                self.require_field(ctx, f, e.span)?;
                Ok(IExpr::FieldRead {
                    target: ctx.self_name.clone(),
                    field: f.clone(),
                })
            }
            ExprKind::FieldAssign(f, v) => {
                self.require_field(ctx, f, e.span)?;
                Ok(IExpr::FieldAssign {
                    target: ctx.self_name.clone(),
                    field: f.clone(),
                    value: Box::new(self.translate_expr(ctx, v)?),
                })
            }
            ExprKind::Call {
                recv, method, args, ..
            } => {
                if method == "assume"
                    && matches!(recv.kind, ExprKind::SelfRef)
                    && args.len() == 1
                {
                    let cond = self.translate_expr(ctx, &args[0])?;
                    return Ok(IExpr::Assume(Box::new(cond)));
                }
                self.translate_call(ctx, recv, method, args, e.span)
            }
            ExprKind::New(c) => {
                if self.table.get(c).is_none() {
                    return Err(TypeError::UnknownClass {
                        class: c.clone(),
                        span: e.span,
                    });
                }
                Ok(IExpr::ObjectLit { class: c.clone() })
            }
            ExprKind::Return(v) => Ok(IExpr::Return(Box::new(self.translate_expr(ctx, v)?))),
            ExprKind::Raise(_) => Ok(IExpr::Fail),
            ExprKind::ArrayLit(items) => {
                let mut out = Vec::new();
                for it in items {
                    out.push(self.translate_expr(ctx, it)?);
                }
                Ok(IExpr::ArrayLit(out))
            }
        }
    }

    fn require_field(&self, ctx: &Ctx, field: &str, span: Span) -> Result<BaseName, TypeError> {
        self.table
            .all_fields(&ctx.class)
            .get(field)
            .cloned()
            .ok_or_else(|| TypeError::NoTypeForField {
                class: ctx.class.clone(),
                field: field.to_string(),
                span,
            })
    }

    fn translate_call(
        &mut self,
        ctx: &mut Ctx,
        recv: &Expr,
        method: &str,
        args: &[Expr],
        span: Span,
    ) -> Result<IExpr, TypeError> {
        let recv_ty = infer_expr(self.table, &ctx.tenv, recv, &mut None)?;
        let singleton = ctx.singleton && matches!(recv.kind, ExprKind::SelfRef);
        let trecv = self.translate_expr(ctx, recv)?;
        let mut targs = Vec::new();
        for a in args {
            targs.push(self.translate_expr(ctx, a)?);
        }

        // Dispatch member set from the static receiver type.
        let members: Vec<BaseName> = match &recv_ty {
            Ty::Known(base) => flatten_base(base),
            Ty::Untyped => {
                if is_builtin_operator(method) {
                    return Ok(self.builtin_call(method, trecv, targs, true));
                }
                let defs: Vec<&MethodEntry> = self
                    .table
                    .classes
                    .values()
                    .filter_map(|c| c.method(method, singleton))
                    .collect();
                match defs.len() {
                    1 => vec![BaseName::Class(defs[0].owner.clone())],
                    _ => {
                        return Err(TypeError::UntypedCall {
                            method: method.to_string(),
                            span,
                        })
                    }
                }
            }
        };

        let has_nil = members
            .iter()
            .any(|m| matches!(m, BaseName::Nil) || matches!(m, BaseName::Class(n) if n == "NilClass"));
        let concrete: Vec<BaseName> = members
            .into_iter()
            .filter(|m| {
                !matches!(m, BaseName::Nil) && !matches!(m, BaseName::Class(n) if n == "NilClass")
            })
            .collect();
        // `nil?` and equality are total, nil receiver included.
        let nil_ok = matches!(method, "nil?" | "==" | "!=" | "classid");
        if concrete.is_empty() {
            if nil_ok {
                return Ok(self.builtin_call(method, trecv, targs, false));
            }
            return Err(TypeError::UnknownMethod {
                recv: "NilClass".to_string(),
                method: method.to_string(),
                span,
            });
        }

        let needs_guard = has_nil && !nil_ok;
        if concrete.len() == 1 && !needs_guard {
            return self.member_call(ctx, &concrete[0], trecv, None, targs, method, singleton, span);
        }

        // Union (or possibly-nil) receiver: bind it to a name, guard on nil,
        // then dispatch on classid in class-id order.
        let rname = match &trecv {
            IExpr::Var(n) => n.clone(),
            _ => self.fresh_name("recv"),
        };
        let mut bindings = Vec::new();
        if !matches!(&trecv, IExpr::Var(_)) {
            bindings.push((rname.clone(), trecv));
        }
        let mut arg_names = Vec::new();
        for (i, t) in targs.into_iter().enumerate() {
            match t {
                IExpr::Var(n) => arg_names.push(n),
                other => {
                    let n = self.fresh_name(&format!("a{}", i + 1));
                    bindings.push((n.clone(), other));
                    arg_names.push(n);
                }
            }
        }
        let arg_vars: Vec<IExpr> = arg_names.iter().map(|n| IExpr::var(n.clone())).collect();

        let mut sorted = concrete.clone();
        sorted.sort_by_key(|m| self.base_class_id(m));
        let mut chain: Option<IExpr> = None;
        for m in sorted.iter().rev() {
            let call = self.member_call(
                ctx,
                m,
                IExpr::var(rname.clone()),
                Some(&rname),
                arg_vars.clone(),
                method,
                singleton,
                span,
            )?;
            chain = Some(match chain {
                None => call,
                Some(rest) => IExpr::If(
                    Box::new(IExpr::call(
                        "==",
                        vec![
                            IExpr::call("classid", vec![IExpr::var(rname.clone())]),
                            IExpr::Value(Const::Int(self.base_class_id(m).into())),
                        ],
                    )),
                    Box::new(call),
                    Box::new(rest),
                ),
            });
        }
        let mut body = chain.unwrap();
        if needs_guard {
            body = IExpr::seq(
                IExpr::Assert {
                    cond: Box::new(IExpr::If(
                        Box::new(IExpr::call("nil?", vec![IExpr::var(rname.clone())])),
                        Box::new(IExpr::Value(Const::False)),
                        Box::new(IExpr::Value(Const::True)),
                    )),
                    kind: AssertKind::NonNil,
                },
                body,
            );
        }
        if bindings.is_empty() {
            Ok(body)
        } else {
            Ok(IExpr::Let {
                bindings,
                body: Box::new(body),
            })
        }
    }

    fn base_class_id(&self, base: &BaseName) -> i64 {
        let name = match base {
            BaseName::Class(n) => n.as_str(),
            BaseName::Array(_) => "Array",
            BaseName::Nil => "NilClass",
            BaseName::Union(_) => unreachable!(),
        };
        self.table.class_id(name).unwrap_or(i64::MAX)
    }

    /// Call on a single known receiver class.
    #[allow(clippy::too_many_arguments)]
    fn member_call(
        &mut self,
        ctx: &mut Ctx,
        base: &BaseName,
        trecv: IExpr,
        _recv_name: Option<&str>,
        targs: Vec<IExpr>,
        method: &str,
        singleton: bool,
        span: Span,
    ) -> Result<IExpr, TypeError> {
        let class_name = match base {
            BaseName::Class(n) => n.clone(),
            BaseName::Array(_) => "Array".to_string(),
            BaseName::Nil => "NilClass".to_string(),
            BaseName::Union(_) => unreachable!(),
        };
        let entry = self
            .table
            .lookup_method(&class_name, method, singleton)
            .cloned();
        match entry {
            None => {
                if is_builtin_operator(method) {
                    Ok(self.builtin_call(method, trecv, targs, false))
                } else {
                    Err(TypeError::UnknownMethod {
                        recv: class_name,
                        method: method.to_string(),
                        span,
                    })
                }
            }
            Some(entry) => match &entry.label {
                Label::Exact => {
                    self.ensure_funcdef(&entry)?;
                    let mut call_args = vec![trecv];
                    call_args.extend(targs);
                    Ok(IExpr::call(entry.mangled(), call_args))
                }
                Label::Pure => self.spec_call(ctx, &entry, trecv, targs, &[], span),
                Label::Modifies(mods) => {
                    let mods = mods.clone();
                    self.spec_call(ctx, &entry, trecv, targs, &mods, span)
                }
            },
        }
    }

    /// T-PureCall / T-ImpureCall: A-normal-form argument binding with fresh
    /// names, assert preconditions, havoc (impure only), bind the result
    /// (uninterpreted application or fresh symbolic), assume postcondition.
    fn spec_call(
        &mut self,
        ctx: &mut Ctx,
        entry: &MethodEntry,
        trecv: IExpr,
        targs: Vec<IExpr>,
        mods: &[(String, String)],
        span: Span,
    ) -> Result<IExpr, TypeError> {
        let sig = entry.sig.clone().ok_or_else(|| TypeError::NoSignature {
            recv: entry.owner.clone(),
            method: entry.name.clone(),
            span,
        })?;
        if sig.params.len() != targs.len() {
            return Err(TypeError::ArityMismatch {
                recv: entry.owner.clone(),
                method: entry.name.clone(),
                expected: sig.params.len(),
                got: targs.len(),
                span,
            });
        }
        let sname = self.fresh_name("s");
        let mut bindings = vec![(sname.clone(), trecv)];
        let mut xnames = Vec::new();
        for (rt, t) in sig.params.iter().zip(targs) {
            let x = self.fresh_name(&rt.binder);
            bindings.push((x.clone(), t));
            xnames.push(x);
        }

        // Predicate context: the callee's class, its binders renamed to the
        // fresh argument names.
        let mut pctx = Ctx {
            class: entry.owner.clone(),
            singleton: entry.singleton,
            self_name: sname.clone(),
            rename: IndexMap::new(),
            tenv: TypeEnv {
                class: entry.owner.clone(),
                singleton: entry.singleton,
                locals: IndexMap::new(),
            },
        };
        for (rt, x) in sig.params.iter().zip(&xnames) {
            pctx.rename.insert(rt.binder.clone(), x.clone());
            pctx.tenv
                .locals
                .insert(rt.binder.clone(), Ty::Known(rt.base.clone()));
        }

        let mut pres = Vec::new();
        for rt in &sig.params {
            if !rt.is_trivial() {
                pres.push(IExpr::Assert {
                    cond: Box::new(self.translate_expr(&mut pctx, &rt.predicate)?),
                    kind: AssertKind::CalleePre {
                        callee: entry.mangled(),
                    },
                });
            }
        }

        let mut havocs = Vec::new();
        for (target, field) in mods {
            let tname = if target == "self" {
                sname.clone()
            } else {
                match entry.params.iter().position(|p| p == target) {
                    Some(i) => xnames[i].clone(),
                    None => {
                        return Err(TypeError::BadModifiesTarget {
                            owner: entry.owner.clone(),
                            method: entry.name.clone(),
                            target: target.clone(),
                            span,
                        })
                    }
                }
            };
            havocs.push(IExpr::Havoc {
                target: tname,
                field: field.clone(),
            });
        }

        let rname = self.fresh_name(&sig.result.binder);
        let rvalue = if mods.is_empty() {
            let mut uf_args = vec![IExpr::var(sname.clone())];
            uf_args.extend(xnames.iter().map(|x| IExpr::var(x.clone())));
            IExpr::call(uninterp_name(&entry.mangled()), uf_args)
        } else {
            IExpr::Fresh(sig.result.base.clone())
        };

        pctx.rename.insert(sig.result.binder.clone(), rname.clone());
        pctx.tenv.locals.insert(
            sig.result.binder.clone(),
            Ty::Known(sig.result.base.clone()),
        );
        let mut inner = IExpr::var(rname.clone());
        if !sig.result.is_trivial() {
            let post = self.translate_expr(&mut pctx, &sig.result.predicate)?;
            inner = IExpr::seq(IExpr::Assume(Box::new(post)), inner);
        }
        let mut body = IExpr::Let {
            bindings: vec![(rname, rvalue)],
            body: Box::new(inner),
        };
        // assert precondition, then havoc, then assume postcondition.
        for h in havocs.into_iter().rev() {
            body = IExpr::seq(h, body);
        }
        for p in pres.into_iter().rev() {
            body = IExpr::seq(p, body);
        }
        let _ = ctx;
        Ok(IExpr::Let {
            bindings,
            body: Box::new(body),
        })
    }

    fn builtin_call(&self, method: &str, trecv: IExpr, targs: Vec<IExpr>, _untyped: bool) -> IExpr {
        let name = match method {
            "<<" => "push",
            other => other,
        };
        let mut args = vec![trecv];
        args.extend(targs);
        IExpr::call(name, args)
    }
}

fn flatten_base(b: &BaseName) -> Vec<BaseName> {
    match b {
        BaseName::Union(ms) => {
            let mut out = Vec::new();
            for m in ms {
                out.extend(flatten_base(m));
            }
            out
        }
        other => vec![other.clone()],
    }
}
