//! Formula terms handed to the SMT backend. Deliberately small: just what
//! the encoding emits, with smart constructors that fold the easy cases so
//! emitted scripts stay readable.

use num_bigint::BigInt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Int,
    Real,
    BitVec(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    And,
    Or,
    Not,
    Implies,
    Eq,
    Ite,
    Add,
    Sub,
    Mul,
    IntDiv,
    Mod,
    RealDiv,
    Neg,
    Le,
    Lt,
    Ge,
    Gt,
    ToReal,
    BvAdd,
    BvSub,
    BvMul,
    BvSdiv,
    BvSrem,
    BvNeg,
    BvSle,
    BvSlt,
    BvSge,
    BvSgt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    BoolLit(bool),
    IntLit(BigInt),
    RealLit(String),
    BvLit(BigInt, u32),
    Const(String),
    App(Op, Vec<Term>),
    /// Uninterpreted function application.
    Uf(String, Vec<Term>),
}

impl Term {
    pub fn int(n: impl Into<BigInt>) -> Term {
        Term::IntLit(n.into())
    }

    pub fn tru() -> Term {
        Term::BoolLit(true)
    }

    pub fn fls() -> Term {
        Term::BoolLit(false)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::BoolLit(true))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Term::BoolLit(false))
    }
}

pub fn and(a: Term, b: Term) -> Term {
    if a.is_true() {
        return b;
    }
    if b.is_true() {
        return a;
    }
    if a.is_false() || b.is_false() {
        return Term::fls();
    }
    // Flatten nested conjunctions for readable output.
    let mut parts = Vec::new();
    for t in [a, b] {
        match t {
            Term::App(Op::And, mut ps) => parts.append(&mut ps),
            other => parts.push(other),
        }
    }
    Term::App(Op::And, parts)
}

pub fn and_all(ts: impl IntoIterator<Item = Term>) -> Term {
    ts.into_iter().fold(Term::tru(), and)
}

pub fn or(a: Term, b: Term) -> Term {
    if a.is_false() {
        return b;
    }
    if b.is_false() {
        return a;
    }
    if a.is_true() || b.is_true() {
        return Term::tru();
    }
    let mut parts = Vec::new();
    for t in [a, b] {
        match t {
            Term::App(Op::Or, mut ps) => parts.append(&mut ps),
            other => parts.push(other),
        }
    }
    Term::App(Op::Or, parts)
}

pub fn or_all(ts: impl IntoIterator<Item = Term>) -> Term {
    ts.into_iter().fold(Term::fls(), or)
}

pub fn not(t: Term) -> Term {
    match t {
        Term::BoolLit(b) => Term::BoolLit(!b),
        Term::App(Op::Not, mut ps) => ps.pop().unwrap(),
        other => Term::App(Op::Not, vec![other]),
    }
}

pub fn implies(a: Term, b: Term) -> Term {
    if a.is_false() || b.is_true() {
        return Term::tru();
    }
    if a.is_true() {
        return b;
    }
    Term::App(Op::Implies, vec![a, b])
}

pub fn eq(a: Term, b: Term) -> Term {
    if a == b {
        return Term::tru();
    }
    match (&a, &b) {
        (Term::IntLit(x), Term::IntLit(y)) => return Term::BoolLit(x == y),
        (Term::BvLit(x, _), Term::BvLit(y, _)) => return Term::BoolLit(x == y),
        (Term::BoolLit(x), Term::BoolLit(y)) => return Term::BoolLit(x == y),
        _ => {}
    }
    Term::App(Op::Eq, vec![a, b])
}

/// Collect the free constant names of a term.
pub fn free_consts(t: &Term, out: &mut std::collections::HashSet<String>) {
    match t {
        Term::Const(n) => {
            out.insert(n.clone());
        }
        Term::App(_, args) | Term::Uf(_, args) => {
            for a in args {
                free_consts(a, out);
            }
        }
        _ => {}
    }
}

pub fn ite(c: Term, t: Term, e: Term) -> Term {
    if c.is_true() {
        return t;
    }
    if c.is_false() {
        return e;
    }
    if t == e {
        return t;
    }
    Term::App(Op::Ite, vec![c, t, e])
}
