//! Symbolic values and the guarded-update heap. Instead of forking the
//! heap at branches, every write is guarded by its path condition:
//! `cell := ite(g, new, old)`. Values of mixed kind merge into guarded
//! unions.

use super::term::{self, Term};
use crate::syntax::ast::BaseName;
use indexmap::IndexMap;

#[derive(Debug, Clone, PartialEq)]
pub enum SymValue {
    Nil,
    Bool(Term),
    /// `Int` sort in int mode, `(_ BitVec w)` in bitvector mode.
    Int(Term),
    Real(Term),
    Obj {
        class: String,
        object_id: Term,
        handle: usize,
    },
    ArrayRef(usize),
    /// Local that was never assigned on this path.
    Undefined,
    /// Guarded alternatives; guards cover disjoint cases by construction.
    Union(Vec<(Term, SymValue)>),
}

impl SymValue {
    /// Flatten into guarded leaf alternatives under `guard`.
    pub fn alternatives(&self, guard: Term) -> Vec<(Term, SymValue)> {
        match self {
            SymValue::Union(alts) => {
                let mut out = Vec::new();
                for (g, v) in alts {
                    out.extend(v.alternatives(term::and(guard.clone(), g.clone())));
                }
                out
            }
            leaf => vec![(guard, leaf.clone())],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SymValue::Nil => "nil",
            SymValue::Bool(_) => "bool",
            SymValue::Int(_) => "integer",
            SymValue::Real(_) => "float",
            SymValue::Obj { .. } => "object",
            SymValue::ArrayRef(_) => "array",
            SymValue::Undefined => "undefined",
            SymValue::Union(_) => "union",
        }
    }
}

/// `ite(g, a, b)` over values: term-level when the kinds line up, a guarded
/// union otherwise.
pub fn merge(g: Term, a: SymValue, b: SymValue) -> SymValue {
    if g.is_true() {
        return a;
    }
    if g.is_false() {
        return b;
    }
    if a == b {
        return a;
    }
    // Undefined marks a path that cannot complete normally (e.g. both
    // branches return); the merged value is only observed on the other side.
    if matches!(a, SymValue::Undefined) {
        return b;
    }
    if matches!(b, SymValue::Undefined) {
        return a;
    }
    match (&a, &b) {
        (SymValue::Bool(x), SymValue::Bool(y)) => {
            SymValue::Bool(term::ite(g, x.clone(), y.clone()))
        }
        (SymValue::Int(x), SymValue::Int(y)) => SymValue::Int(term::ite(g, x.clone(), y.clone())),
        (SymValue::Real(x), SymValue::Real(y)) => {
            SymValue::Real(term::ite(g, x.clone(), y.clone()))
        }
        (
            SymValue::Obj {
                class: c1,
                object_id: i1,
                handle: h1,
            },
            SymValue::Obj {
                class: c2,
                object_id: i2,
                handle: h2,
            },
        ) if c1 == c2 && h1 == h2 => SymValue::Obj {
            class: c1.clone(),
            object_id: term::ite(g, i1.clone(), i2.clone()),
            handle: *h1,
        },
        _ => {
            let mut alts = a.alternatives(g.clone());
            alts.extend(b.alternatives(term::not(g)));
            normalize_union(alts)
        }
    }
}

fn normalize_union(alts: Vec<(Term, SymValue)>) -> SymValue {
    // Merge alternatives sharing the same kind/handle back together.
    let mut out: Vec<(Term, SymValue)> = Vec::new();
    for (g, v) in alts {
        if g.is_false() {
            continue;
        }
        let mut merged = false;
        for (og, ov) in out.iter_mut() {
            let fits = match (&v, &*ov) {
                (SymValue::Nil, SymValue::Nil) | (SymValue::Undefined, SymValue::Undefined) => true,
                (SymValue::Bool(_), SymValue::Bool(_))
                | (SymValue::Int(_), SymValue::Int(_))
                | (SymValue::Real(_), SymValue::Real(_)) => true,
                (SymValue::Obj { class: c1, handle: h1, .. }, SymValue::Obj { class: c2, handle: h2, .. }) => {
                    c1 == c2 && h1 == h2
                }
                (SymValue::ArrayRef(h1), SymValue::ArrayRef(h2)) => h1 == h2,
                _ => false,
            };
            if fits {
                let new = match (&v, &*ov) {
                    (SymValue::Bool(x), SymValue::Bool(y)) => {
                        SymValue::Bool(term::ite(g.clone(), x.clone(), y.clone()))
                    }
                    (SymValue::Int(x), SymValue::Int(y)) => {
                        SymValue::Int(term::ite(g.clone(), x.clone(), y.clone()))
                    }
                    (SymValue::Real(x), SymValue::Real(y)) => {
                        SymValue::Real(term::ite(g.clone(), x.clone(), y.clone()))
                    }
                    (
                        SymValue::Obj { class, object_id: i1, handle },
                        SymValue::Obj { object_id: i2, .. },
                    ) => SymValue::Obj {
                        class: class.clone(),
                        object_id: term::ite(g.clone(), i1.clone(), i2.clone()),
                        handle: *handle,
                    },
                    (same, _) => same.clone(),
                };
                *ov = new;
                *og = term::or(og.clone(), g.clone());
                merged = true;
                break;
            }
        }
        if !merged {
            out.push((g, v));
        }
    }
    if out.len() == 1 && out[0].0.is_true() {
        return out.pop_value();
    }
    SymValue::Union(out)
}

trait PopValue {
    fn pop_value(self) -> SymValue;
}
impl PopValue for Vec<(Term, SymValue)> {
    fn pop_value(mut self) -> SymValue {
        self.pop().unwrap().1
    }
}

#[derive(Debug, Clone)]
pub struct ObjData {
    pub class: String,
    pub fields: IndexMap<String, SymValue>,
}

#[derive(Debug, Clone)]
pub struct ArrData {
    pub elem: BaseName,
    pub cells: Vec<SymValue>,
    /// Current length; literal for array literals, a constrained symbolic
    /// for array-typed inputs.
    pub len: Term,
}

#[derive(Debug, Clone, Default)]
pub struct Heap {
    pub objects: Vec<ObjData>,
    pub arrays: Vec<ArrData>,
}

impl Heap {
    pub fn alloc_object(&mut self, class: String, fields: IndexMap<String, SymValue>) -> usize {
        self.objects.push(ObjData { class, fields });
        self.objects.len() - 1
    }

    pub fn alloc_array(&mut self, elem: BaseName, cells: Vec<SymValue>, len: Term) -> usize {
        self.arrays.push(ArrData { elem, cells, len });
        self.arrays.len() - 1
    }
}
