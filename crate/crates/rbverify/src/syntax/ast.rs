//! AST for the core Ruby-like surface language.
//!
//! Nodes carry byte spans into the original source. Equality between nodes
//! deliberately ignores spans so that round-trip tests (parse . print . parse)
//! can compare trees structurally.

use num_bigint::BigInt;
use std::fmt;

/// Half-open byte range into the source text.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

// Spans never participate in equality.
impl PartialEq for Span {
    fn eq(&self, _other: &Span) -> bool {
        true
    }
}
impl Eq for Span {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Const {
    Nil,
    True,
    False,
    Int(BigInt),
    /// Stored as the normalized decimal literal so printing round-trips.
    Float(String),
}

impl Const {
    pub fn float(v: f64) -> Const {
        let mut s = format!("{}", v);
        if !s.contains('.') && !s.contains('e') && !s.contains('E') {
            s.push_str(".0");
        }
        Const::Float(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn synthetic(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: Span::default(),
        }
    }

    pub fn true_() -> Self {
        Expr::synthetic(ExprKind::Const(Const::True))
    }

    pub fn nil() -> Self {
        Expr::synthetic(ExprKind::Const(Const::Nil))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Const(Const),
    Var(String),
    Assign(String, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    SelfRef,
    /// Field read `@f`; the `@` sigil is stripped.
    FieldRead(String),
    FieldAssign(String, Box<Expr>),
    Call {
        recv: Box<Expr>,
        method: String,
        args: Vec<Expr>,
        /// True when the receiver was an implicit `self` (bare method name
        /// in the surface text); printing preserves the surface form.
        implicit_self: bool,
    },
    New(String),
    Return(Box<Expr>),
    Raise(String),
    ArrayLit(Vec<Expr>),
}

/// Base type names appearing in annotations and `var_type` declarations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BaseName {
    Class(String),
    Array(Box<BaseName>),
    Union(Vec<BaseName>),
    Nil,
}

impl BaseName {
    pub fn class(name: &str) -> BaseName {
        BaseName::Class(name.to_string())
    }

    pub fn is_builtin_numeric(&self) -> bool {
        matches!(self, BaseName::Class(n) if n == "Integer" || n == "Float")
    }
}

impl fmt::Display for BaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseName::Class(n) => write!(f, "{}", n),
            BaseName::Array(e) => write!(f, "Array<{}>", e),
            BaseName::Union(ms) => {
                let parts: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
                write!(f, "{}", parts.join(" or "))
            }
            BaseName::Nil => write!(f, "nil"),
        }
    }
}

/// `{x : A | e}`: a base type refined by a pure boolean predicate over `binder`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinedType {
    pub binder: String,
    pub base: BaseName,
    pub predicate: Expr,
}

impl RefinedType {
    pub fn trivial(binder: &str, base: BaseName) -> Self {
        RefinedType {
            binder: binder.to_string(),
            base,
            predicate: Expr::true_(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.predicate.kind, ExprKind::Const(Const::True))
    }
}

/// Dependent function type: any param binder may appear in any param
/// predicate and in the result predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSignature {
    pub params: Vec<RefinedType>,
    pub result: RefinedType,
}

/// Translation directive attached to a method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Exact,
    Pure,
    /// Entries are (receiver-or-param name, field name without `@`).
    Modifies(Vec<(String, String)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclKind {
    Class {
        name: String,
        super_name: Option<String>,
        members: Vec<Decl>,
    },
    Module {
        name: String,
        members: Vec<Decl>,
    },
    /// `var_type :@f, 'T'` (multiple fields may share one declaration).
    VarType {
        fields: Vec<String>,
        base: BaseName,
    },
    MethodDef {
        name: String,
        singleton: bool,
        params: Vec<String>,
        sig: Option<MethodSignature>,
        label: Label,
        verify_label: Option<String>,
        body: Expr,
    },
    /// `type :m, '(...) -> ...'` with no accompanying definition in the
    /// surface text. `label` stays `None` until class-table construction,
    /// which either merges the annotation into a definition (defaulting to
    /// exact) or rejects a label-less standalone annotation.
    MethodAnnot {
        method: String,
        sig: MethodSignature,
        label: Option<Label>,
        verify_label: Option<String>,
    },
    Include(String),
    AttrAccessor(Vec<String>),
    /// e.g. `belongs_to :folder`
    Generator {
        kind: String,
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

/// Walk an expression tree, calling `f` on every node (pre-order).
pub fn walk_expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(e);
    match &e.kind {
        ExprKind::Const(_)
        | ExprKind::Var(_)
        | ExprKind::SelfRef
        | ExprKind::FieldRead(_)
        | ExprKind::New(_)
        | ExprKind::Raise(_) => {}
        ExprKind::Assign(_, e1) | ExprKind::FieldAssign(_, e1) | ExprKind::Return(e1) => {
            walk_expr(e1, f)
        }
        ExprKind::If(c, t, e2) => {
            walk_expr(c, f);
            walk_expr(t, f);
            walk_expr(e2, f);
        }
        ExprKind::Seq(a, b) => {
            walk_expr(a, f);
            walk_expr(b, f);
        }
        ExprKind::Call { recv, args, .. } => {
            walk_expr(recv, f);
            for a in args {
                walk_expr(a, f);
            }
        }
        ExprKind::ArrayLit(items) => {
            for a in items {
                walk_expr(a, f);
            }
        }
    }
}
