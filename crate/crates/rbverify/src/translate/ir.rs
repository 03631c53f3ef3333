//! The intermediate language. Verified bodies are lowered here before
//! symbolic evaluation; the printer below backs `--dump-ir` and the golden
//! translation tests.

use crate::syntax::ast::{BaseName, Const, MethodSignature};
use std::fmt::Write;

/// Why an assertion exists; drives counterexample trigger classification
/// and never affects evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertKind {
    /// Precondition of a pure or modifies-labeled callee.
    CalleePre { callee: String },
    /// Receiver must not be nil.
    NonNil,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IExpr {
    Value(Const),
    /// `new A`: fresh positive object id, every declared field bound to nil.
    ObjectLit { class: String },
    Var(String),
    Assign(String, Box<IExpr>),
    If(Box<IExpr>, Box<IExpr>, Box<IExpr>),
    Seq(Box<IExpr>, Box<IExpr>),
    Let {
        bindings: Vec<(String, IExpr)>,
        body: Box<IExpr>,
    },
    /// Target is an exact funcDef, an uninterpreted pure method, or a
    /// builtin operator. The receiver is always `args[0]`.
    Funcall { name: String, args: Vec<IExpr> },
    Assert { cond: Box<IExpr>, kind: AssertKind },
    Assume(Box<IExpr>),
    Return(Box<IExpr>),
    Havoc { target: String, field: String },
    FieldAssign {
        target: String,
        field: String,
        value: Box<IExpr>,
    },
    FieldRead { target: String, field: String },
    /// Reachable exception (`raise` in the source).
    Fail,
    /// Fresh symbolic of the given base type, expression position
    /// (the symDef of rule T-ImpureCall's result object).
    Fresh(BaseName),
    ArrayLit(Vec<IExpr>),
}

impl IExpr {
    pub fn nil() -> IExpr {
        IExpr::Value(Const::Nil)
    }

    pub fn var(n: impl Into<String>) -> IExpr {
        IExpr::Var(n.into())
    }

    pub fn seq(a: IExpr, b: IExpr) -> IExpr {
        IExpr::Seq(Box::new(a), Box::new(b))
    }

    pub fn call(name: impl Into<String>, args: Vec<IExpr>) -> IExpr {
        IExpr::Funcall {
            name: name.into(),
            args,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IDef {
    FuncDef {
        name: String,
        /// Leading `self`, then the method parameters.
        params: Vec<String>,
        body: IExpr,
    },
    SymDef { name: String, base: BaseName },
}

/// Which verification obligation a query discharges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryKind {
    /// The method's own signature.
    Method,
    /// A mixin assume-guarantee obligation from `module`.
    Obligation { module: String },
}

#[derive(Debug, Clone)]
pub struct VerificationQuery {
    pub owner: String,
    pub method: String,
    pub singleton: bool,
    pub kind: QueryKind,
    /// Symbolic inputs: `self`, then parameters in order.
    pub sym_inputs: Vec<IDef>,
    /// Translated parameter refinements, in order.
    pub assumptions: Vec<IExpr>,
    /// funcall of the subject funcDef over the symbolic inputs, bound to
    /// the result binder.
    pub result_binder: String,
    pub call: IExpr,
    /// Translated result refinement over the result binder.
    pub guarantee: IExpr,
    /// The exact funcDefs reachable from the query (subject first).
    pub defs: Vec<IDef>,
    /// Signature of the subject, for reporting.
    pub sig: MethodSignature,
    /// `verify:` label, when present.
    pub verify_label: Option<String>,
}

impl VerificationQuery {
    pub fn display_name(&self) -> String {
        crate::typesys::mangle(&self.owner, &self.method, self.singleton)
    }
}

pub fn print_query(q: &VerificationQuery) -> String {
    let mut s = String::new();
    writeln!(s, "query {} {{", q.display_name()).unwrap();
    for d in &q.sym_inputs {
        writeln!(s, "  {}", print_def_header(d)).unwrap();
    }
    for a in &q.assumptions {
        writeln!(s, "  assume {}", print_iexpr(a)).unwrap();
    }
    writeln!(s, "  let {} = {}", q.result_binder, print_iexpr(&q.call)).unwrap();
    writeln!(s, "  guarantee {}", print_iexpr(&q.guarantee)).unwrap();
    writeln!(s, "}}").unwrap();
    for d in &q.defs {
        s.push_str(&print_def(d));
    }
    s
}

fn print_def_header(d: &IDef) -> String {
    match d {
        IDef::FuncDef { name, params, .. } => {
            format!("funcdef {}({})", name, params.join(", "))
        }
        IDef::SymDef { name, base } => format!("symdef {} : {}", name, base),
    }
}

pub fn print_def(d: &IDef) -> String {
    match d {
        IDef::FuncDef { name, params, body } => {
            let mut s = String::new();
            writeln!(s, "funcdef {}({}) {{", name, params.join(", ")).unwrap();
            print_indented(&mut s, body, 1);
            writeln!(s, "}}").unwrap();
            s
        }
        IDef::SymDef { name, base } => format!("symdef {} : {}\n", name, base),
    }
}

fn print_indented(out: &mut String, e: &IExpr, level: usize) {
    match e {
        IExpr::Seq(a, b) => {
            print_indented(out, a, level);
            print_indented(out, b, level);
        }
        IExpr::If(c, t, els) => {
            indent(out, level);
            writeln!(out, "if {} {{", print_iexpr(c)).unwrap();
            print_indented(out, t, level + 1);
            indent(out, level);
            out.push_str("} else {\n");
            print_indented(out, els, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        IExpr::Let { bindings, body } => {
            for (n, v) in bindings {
                indent(out, level);
                writeln!(out, "let {} = {}", n, print_iexpr(v)).unwrap();
            }
            print_indented(out, body, level);
        }
        _ => {
            indent(out, level);
            writeln!(out, "{}", print_iexpr(e)).unwrap();
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

pub fn print_iexpr(e: &IExpr) -> String {
    match e {
        IExpr::Value(c) => match c {
            Const::Nil => "nil".to_string(),
            Const::True => "true".to_string(),
            Const::False => "false".to_string(),
            Const::Int(n) => n.to_string(),
            Const::Float(s) => s.clone(),
        },
        IExpr::ObjectLit { class } => format!("objectlit {}", class),
        IExpr::Var(n) => n.clone(),
        IExpr::Assign(n, v) => format!("{} := {}", n, print_iexpr(v)),
        IExpr::If(c, t, els) => format!(
            "(if {} {} {})",
            print_iexpr(c),
            print_iexpr(t),
            print_iexpr(els)
        ),
        IExpr::Seq(a, b) => format!("({}; {})", print_iexpr(a), print_iexpr(b)),
        IExpr::Let { bindings, body } => {
            let bs: Vec<String> = bindings
                .iter()
                .map(|(n, v)| format!("{} = {}", n, print_iexpr(v)))
                .collect();
            format!("(let {} in {})", bs.join(", "), print_iexpr(body))
        }
        IExpr::Funcall { name, args } => {
            let parts: Vec<String> = args.iter().map(print_iexpr).collect();
            format!("{}({})", name, parts.join(", "))
        }
        IExpr::Assert { cond, .. } => format!("assert {}", print_iexpr(cond)),
        IExpr::Assume(c) => format!("assume {}", print_iexpr(c)),
        IExpr::Return(v) => format!("return {}", print_iexpr(v)),
        IExpr::Havoc { target, field } => format!("havoc {}.{}", target, field),
        IExpr::FieldAssign {
            target,
            field,
            value,
        } => format!("{}.{} := {}", target, field, print_iexpr(value)),
        IExpr::FieldRead { target, field } => format!("{}.{}", target, field),
        IExpr::Fail => "fail".to_string(),
        IExpr::Fresh(b) => format!("fresh {}", b),
        IExpr::ArrayLit(items) => {
            let parts: Vec<String> = items.iter().map(print_iexpr).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}
