//! Static expansion of metaprogramming directives (`attr_accessor`,
//! `belongs_to`) into ordinary annotated methods, and collection of
//! assume-guarantee obligations introduced by `include`.

use crate::syntax::ast::*;
use crate::syntax::parse_signature;
use crate::typesys::{ClassTable, MethodEntry, Origin, TypeError};

/// Expand generator directives in place. Idempotent: entries tagged
/// `Origin::Generated` are replaced, user-written ones are kept.
pub fn expand_generators(table: &mut ClassTable) -> Result<(), TypeError> {
    let class_names: Vec<String> = table.classes.keys().cloned().collect();
    for cname in class_names {
        let gens = table.classes[&cname].generators.clone();
        for g in gens {
            match &g.kind {
                DeclKind::AttrAccessor(fields) => {
                    for f in fields {
                        let base = field_type(table, &cname, f, g.span)?;
                        add_generated(
                            table,
                            &cname,
                            f,
                            &format!("() -> {} i {{ i == @{} }}", base, f),
                            Label::Pure,
                            vec![],
                            g.span,
                        );
                        add_generated(
                            table,
                            &cname,
                            &format!("{}=", f),
                            &format!("({} i) -> {} out {{ i == @{} }}", base, base, f),
                            Label::Modifies(vec![("self".to_string(), f.clone())]),
                            vec!["i".to_string()],
                            g.span,
                        );
                    }
                }
                DeclKind::Generator { kind, args } if kind == "belongs_to" => {
                    for assoc in args {
                        let target = camelize(assoc);
                        if table.get(&target).is_none() {
                            return Err(TypeError::UnknownClass {
                                class: target,
                                span: g.span,
                            });
                        }
                        // The association is backed by a same-named field.
                        let info = table.classes.get_mut(&cname).unwrap();
                        info.fields
                            .entry(assoc.clone())
                            .or_insert(BaseName::Class(target.clone()));
                        add_generated(
                            table,
                            &cname,
                            assoc,
                            &format!("() -> {} c {{ c == @{} }}", target, assoc),
                            Label::Pure,
                            vec![],
                            g.span,
                        );
                        add_generated(
                            table,
                            &cname,
                            &format!("{}=", assoc),
                            &format!("({} i) -> {} o {{ {} == @{} && o == i }}", target, target, "i", assoc),
                            Label::Modifies(vec![("self".to_string(), assoc.clone())]),
                            vec!["i".to_string()],
                            g.span,
                        );
                    }
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn field_type(
    table: &ClassTable,
    class: &str,
    field: &str,
    span: Span,
) -> Result<BaseName, TypeError> {
    table
        .all_fields(class)
        .get(field)
        .cloned()
        .ok_or_else(|| TypeError::NoTypeForField {
            class: class.to_string(),
            field: field.to_string(),
            span,
        })
}

fn add_generated(
    table: &mut ClassTable,
    class: &str,
    method: &str,
    sig_text: &str,
    label: Label,
    params: Vec<String>,
    span: Span,
) {
    let info = table.classes.get_mut(class).unwrap();
    let key = (method.to_string(), false);
    if let Some(existing) = info.methods.get(&key) {
        if existing.origin != Origin::Generated {
            return;
        }
    }
    let (sig, _) = parse_signature(sig_text)
        .unwrap_or_else(|e| panic!("generated signature `{}` failed to parse: {}", sig_text, e));
    // Getters and setters get real bodies (`@f` / `@f = i; @f`) so they can
    // be inlined in obligations and evaluated by the replay interpreter.
    let field = method.trim_end_matches('=');
    let body = if method.ends_with('=') {
        Expr::synthetic(ExprKind::Seq(
            Box::new(Expr::synthetic(ExprKind::FieldAssign(
                field.to_string(),
                Box::new(Expr::synthetic(ExprKind::Var(params[0].clone()))),
            ))),
            Box::new(Expr::synthetic(ExprKind::FieldRead(field.to_string()))),
        ))
    } else {
        Expr::synthetic(ExprKind::FieldRead(field.to_string()))
    };
    info.methods.insert(
        key,
        MethodEntry {
            owner: class.to_string(),
            name: method.to_string(),
            singleton: false,
            params,
            sig: Some(sig),
            label,
            verify_label: None,
            body: Some(body),
            origin: Origin::Generated,
            span,
        },
    );
}

fn camelize(s: &str) -> String {
    s.split('_')
        .map(|part| {
            let mut c = part.chars();
            match c.next() {
                Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
                None => String::new(),
            }
        })
        .collect()
}

/// An assume-guarantee obligation from a mixin: the including class must
/// provide `method` satisfying `sig` (the module's annotation for a method
/// it does not itself define).
#[derive(Debug, Clone)]
pub struct Obligation {
    pub class: String,
    pub module: String,
    pub method: String,
    pub sig: MethodSignature,
    pub span: Span,
}

/// An obligation the including class fails to implement at all; reported as
/// a verification failure, not a crash.
#[derive(Debug, Clone)]
pub struct MissingImplementation {
    pub class: String,
    pub module: String,
    pub method: String,
    pub span: Span,
}

pub fn collect_obligations(
    table: &ClassTable,
) -> (Vec<Obligation>, Vec<MissingImplementation>) {
    let mut obligations = Vec::new();
    let mut missing = Vec::new();
    for info in table.classes.values() {
        if info.is_module {
            continue;
        }
        for module_name in &info.includes {
            let Some(module) = table.get(module_name) else {
                continue;
            };
            for entry in module.methods.values() {
                // Annotation-only entries in a module describe methods the
                // module expects from its host.
                if entry.body.is_some() {
                    continue;
                }
                let Some(sig) = &entry.sig else { continue };
                let provided = info
                    .method(&entry.name, false)
                    .or_else(|| lookup_in_supers(table, info, &entry.name));
                match provided {
                    Some(m) if m.body.is_some() || m.origin == Origin::Generated => {
                        obligations.push(Obligation {
                            class: info.name.clone(),
                            module: module_name.clone(),
                            method: entry.name.clone(),
                            sig: sig.clone(),
                            span: entry.span,
                        });
                    }
                    _ => missing.push(MissingImplementation {
                        class: info.name.clone(),
                        module: module_name.clone(),
                        method: entry.name.clone(),
                        span: entry.span,
                    }),
                }
            }
        }
    }
    (obligations, missing)
}

fn lookup_in_supers<'a>(
    table: &'a ClassTable,
    info: &crate::typesys::ClassInfo,
    method: &str,
) -> Option<&'a MethodEntry> {
    let mut cur = info.super_name.clone();
    while let Some(cname) = cur {
        let sup = table.get(&cname)?;
        if let Some(e) = sup.method(method, false) {
            return Some(e);
        }
        cur = sup.super_name.clone();
    }
    None
}
