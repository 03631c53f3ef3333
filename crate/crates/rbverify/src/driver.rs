//! The verification pipeline: parse, table construction, expansion, type
//! checking, translation, encoding, solving, replay. Each method is
//! isolated; one failure never aborts the others.

use crate::config::{Config, IntMode};
use crate::expand;
use crate::interp::{self, Replay, Trigger};
use crate::smt::{self, Model, SolverVerdict};
use crate::syntax;
use crate::translate::{self, ir, Translated};
use crate::typesys::{self, ClassTable};
use crate::vcgen::{self, encode_query, CheckKind, EncodeError, InputBinding, InputPart, QueryEncoding};
use crate::vcgen::term::{free_consts, not, or_all, Term};
use std::collections::HashSet;
use num_bigint::BigInt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Counterexample {
    /// Source-level name (with the `real_` prefix) -> rendered value.
    pub bindings: Vec<(String, String)>,
    pub trigger: Trigger,
    pub replay: Replay,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Safe,
    Unsafe(Counterexample),
    Unknown { reason: String },
    BoundExceeded(Option<Counterexample>),
    TranslationError { detail: String },
}

impl Verdict {
    pub fn word(&self) -> &'static str {
        match self {
            Verdict::Safe => "SAFE",
            Verdict::Unsafe(_) => "UNSAFE",
            Verdict::Unknown { .. } => "UNKNOWN",
            Verdict::BoundExceeded(_) => "BOUND_EXCEEDED",
            Verdict::TranslationError { .. } => "TRANSLATION_ERROR",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub owner: String,
    pub method: String,
    pub singleton: bool,
    /// Module name when this row is a mixin obligation.
    pub obligation_of: Option<String>,
    pub verdict: Verdict,
    pub wall: Duration,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub reports: Vec<MethodReport>,
    /// (query name, rendered IR), populated under --dump-ir.
    pub ir_dumps: Vec<(String, String)>,
    /// (file name, script), populated under --dump-smt.
    pub smt_dumps: Vec<(String, String)>,
}

/// Whole-program failure (parse error, bad class table): nothing can be
/// verified.
pub fn render_parse_error(src: &str, e: &syntax::ParseError) -> String {
    typesys::TypeError::from(e.clone()).render(src)
}

fn prepare(src: &str) -> Result<ClassTable, String> {
    let prog = syntax::parse_program(src).map_err(|e| render_parse_error(src, &e))?;
    let mut table = typesys::build_class_table(&prog).map_err(|e| e.render(src))?;
    expand::expand_generators(&mut table).map_err(|e| e.render(src))?;
    Ok(table)
}

/// Run the full pipeline. `solve` false computes queries and dumps only.
pub fn run(src: &str, config: &Config, solve: bool) -> Result<RunOutput, String> {
    let table = prepare(src)?;
    let state = translate::infer_state(&table);
    let (obligations, missing) = expand::collect_obligations(&table);
    let translated = translate::translate_program(&table, &obligations, &missing);

    let mut out = RunOutput::default();
    let solver = if solve {
        Some(smt::find_solver(config.solver.as_ref()).map_err(|e| e.to_string())?)
    } else {
        None
    };

    for t in translated {
        match t {
            Translated::Query(q) => {
                if let Some(label) = &config.label {
                    if q.verify_label.as_deref() != Some(label.as_str()) {
                        continue;
                    }
                }
                // Base type check first; its errors become rows.
                let start = Instant::now();
                if let Some(entry) = table.lookup_method(&q.owner, &q.method, q.singleton) {
                    if let Err(e) = typesys::check_method(&table, entry) {
                        out.reports.push(MethodReport {
                            owner: q.owner.clone(),
                            method: q.method.clone(),
                            singleton: q.singleton,
                            obligation_of: obligation_module(&q),
                            verdict: Verdict::TranslationError {
                                detail: e.render(src),
                            },
                            wall: start.elapsed(),
                        });
                        continue;
                    }
                }
                if config.dump_ir {
                    out.ir_dumps.push((q.display_name(), ir::print_query(&q)));
                }
                let verdict = if solve {
                    solve_query(&table, &state, config, &q, solver.as_ref().unwrap(), &mut out)
                } else {
                    dump_only(&table, &state, config, &q, &mut out)
                };
                out.reports.push(MethodReport {
                    owner: q.owner.clone(),
                    method: q.method.clone(),
                    singleton: q.singleton,
                    obligation_of: obligation_module(&q),
                    verdict,
                    wall: start.elapsed(),
                });
            }
            Translated::Error {
                owner,
                method,
                singleton,
                error,
            } => out.reports.push(MethodReport {
                owner,
                method,
                singleton,
                obligation_of: None,
                verdict: Verdict::TranslationError {
                    detail: error.render(src),
                },
                wall: Duration::ZERO,
            }),
            Translated::MissingImpl(m) => out.reports.push(MethodReport {
                owner: m.class.clone(),
                method: m.method.clone(),
                singleton: false,
                obligation_of: Some(m.module.clone()),
                verdict: Verdict::TranslationError {
                    detail: format!(
                        "class {} does not implement `{}` required by module {}",
                        m.class, m.method, m.module
                    ),
                },
                wall: Duration::ZERO,
            }),
        }
    }
    Ok(out)
}

fn obligation_module(q: &ir::VerificationQuery) -> Option<String> {
    match &q.kind {
        ir::QueryKind::Method => None,
        ir::QueryKind::Obligation { module } => Some(module.clone()),
    }
}

fn dump_only(
    table: &ClassTable,
    state: &translate::GlobalState,
    config: &Config,
    q: &ir::VerificationQuery,
    out: &mut RunOutput,
) -> Verdict {
    match encode_query(table, state, config, q) {
        Ok(enc) => {
            if config.dump_smt.is_some() {
                let goals = build_goals(&enc);
                for g in goals {
                    out.smt_dumps.push((
                        format!("{}.{}.smt2", q.display_name(), g.tag),
                        g.script,
                    ));
                }
            }
            Verdict::Unknown {
                reason: "not solved (dump only)".into(),
            }
        }
        Err(e) => encode_error_verdict(e),
    }
}

fn encode_error_verdict(e: EncodeError) -> Verdict {
    match e {
        EncodeError::DepthExceeded => Verdict::Unknown {
            reason: "inline depth limit exceeded".into(),
        },
        EncodeError::Unsupported(m) => Verdict::TranslationError { detail: m },
    }
}

struct Goal {
    tag: &'static str,
    script: String,
    /// Marker names, in check order, for classifying which check fired.
    markers: Vec<(String, CheckKind)>,
}

/// The four ordered satisfiability goals of one query. A model for any of
/// the first three is an UNSAFE counterexample; the fourth is the array
/// capacity bound.
fn build_goals(enc: &QueryEncoding) -> Vec<Goal> {
    let base = vec![enc.background.clone(), enc.assumptions.clone()];
    let capacity_ok = enc.capacity_ok();
    let mut goals = Vec::new();

    let mut post = base.clone();
    post.push(capacity_ok.clone());
    post.push(not(enc.raise_cond.clone()));
    post.push(not(enc.guarantee.clone()));
    goals.push(Goal {
        tag: "post",
        script: smt::build_script(&enc.decls, &enc.ufs, &post, &[]),
        markers: Vec::new(),
    });

    if !enc.raise_cond.is_false() {
        let mut raise = base.clone();
        raise.push(capacity_ok.clone());
        raise.push(enc.raise_cond.clone());
        goals.push(Goal {
            tag: "raise",
            script: smt::build_script(&enc.decls, &enc.ufs, &raise, &[]),
            markers: Vec::new(),
        });
    }

    let checks: Vec<&(CheckKind, Term)> = enc
        .checks
        .iter()
        .filter(|(k, t)| *k != CheckKind::Capacity && !t.is_false())
        .collect();
    if !checks.is_empty() {
        let mut marker_terms = Vec::new();
        let mut markers = Vec::new();
        for (i, (kind, viol)) in checks.iter().enumerate() {
            let name = format!("check%{}", i);
            marker_terms.push((name.clone(), viol.clone()));
            markers.push((name, kind.clone()));
        }
        let mut asserts = base.clone();
        asserts.push(capacity_ok.clone());
        asserts.push(or_all(
            marker_terms.iter().map(|(n, _)| Term::Const(n.clone())),
        ));
        goals.push(Goal {
            tag: "checks",
            script: smt::build_script(&enc.decls, &enc.ufs, &asserts, &marker_terms),
            markers,
        });
    }

    let cap_viol = or_all(
        enc.checks
            .iter()
            .filter(|(k, _)| *k == CheckKind::Capacity)
            .map(|(_, t)| t.clone()),
    );
    if !cap_viol.is_false() {
        let mut asserts = base;
        asserts.push(cap_viol);
        goals.push(Goal {
            tag: "capacity",
            script: smt::build_script(&enc.decls, &enc.ufs, &asserts, &[]),
            markers: Vec::new(),
        });
    }
    goals
}

fn solve_query(
    table: &ClassTable,
    state: &translate::GlobalState,
    config: &Config,
    q: &ir::VerificationQuery,
    solver: &PathBuf,
    out: &mut RunOutput,
) -> Verdict {
    let enc = match encode_query(table, state, config, q) {
        Ok(enc) => enc,
        Err(e) => return encode_error_verdict(e),
    };
    let goals = build_goals(&enc);
    if config.dump_smt.is_some() {
        for g in &goals {
            out.smt_dumps.push((
                format!("{}.{}.smt2", q.display_name(), g.tag),
                g.script.clone(),
            ));
        }
    }
    let timeout = Duration::from_secs(config.timeout_secs);
    let mut soft_failure: Option<String> = None;
    for g in &goals {
        match smt::run_solver(solver, &g.script, timeout) {
            Ok(SolverVerdict::Unsat) => continue,
            Ok(SolverVerdict::Unknown) => {
                soft_failure.get_or_insert_with(|| "solver returned unknown".into());
            }
            Ok(SolverVerdict::Timeout) => {
                soft_failure.get_or_insert_with(|| {
                    format!("solver timed out after {}s", config.timeout_secs)
                });
            }
            Err(e) => {
                soft_failure.get_or_insert_with(|| e.to_string());
            }
            Ok(SolverVerdict::Sat(model)) => {
                let trigger = match g.tag {
                    "post" => Trigger::Postcondition,
                    "raise" => Trigger::Raise,
                    "capacity" => Trigger::Check(CheckKind::Capacity),
                    _ => {
                        // First marker the model sets explains the failure.
                        let kind = g
                            .markers
                            .iter()
                            .find(|(n, _)| {
                                matches!(model.get(n), Some(smt::ModelValue::Bool(true)))
                            })
                            .map(|(_, k)| k.clone())
                            .unwrap_or(CheckKind::NonNil);
                        Trigger::Check(kind)
                    }
                };
                // "We only show the bindings relevant to the specification":
                // constants free in the assumptions and the violated part.
                let mut relevant = HashSet::new();
                free_consts(&enc.assumptions, &mut relevant);
                match &trigger {
                    Trigger::Postcondition => free_consts(&enc.guarantee, &mut relevant),
                    Trigger::Raise => free_consts(&enc.raise_cond, &mut relevant),
                    Trigger::Check(kind) => {
                        for (k, t) in &enc.checks {
                            if k == kind {
                                free_consts(t, &mut relevant);
                            }
                        }
                    }
                }
                let bindings = render_bindings(&enc, &model, config.int_mode, Some(&relevant));
                let replay = interp::replay_counterexample(table, config, &enc, q, &model, &trigger);
                let cex = Counterexample {
                    bindings,
                    trigger: trigger.clone(),
                    replay,
                };
                return if g.tag == "capacity" {
                    Verdict::BoundExceeded(Some(cex))
                } else {
                    Verdict::Unsafe(cex)
                };
            }
        }
    }
    match soft_failure {
        // Never coerce unknown or timeout into SAFE.
        Some(reason) => Verdict::Unknown { reason },
        None => Verdict::Safe,
    }
}

fn signed(mv: &smt::ModelValue, mode: IntMode) -> Option<BigInt> {
    let smt::ModelValue::Int(n) = mv else { return None };
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

fn render_scalar(mv: &smt::ModelValue, mode: IntMode) -> String {
    match mv {
        smt::ModelValue::Int(_) => signed(mv, mode).unwrap().to_string(),
        other => other.render(),
    }
}

/// Source-level counterexample bindings: one entry per input the model
/// constrains, arrays and unions reassembled.
pub fn render_bindings(
    enc: &QueryEncoding,
    model: &Model,
    mode: IntMode,
    relevant: Option<&HashSet<String>>,
) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut groups: Vec<(String, Option<String>)> = Vec::new();
    for b in &enc.inputs {
        if let Some(rel) = relevant {
            if !rel.contains(&b.smt_name) {
                continue;
            }
        }
        let key = (b.root.clone(), b.field.clone());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (root, field) in groups {
        let members: Vec<&InputBinding> = enc
            .inputs
            .iter()
            .filter(|b| b.root == root && b.field == field)
            .collect();
        let display = match &field {
            None => format!("real_{}", root),
            Some(f) if root == "self" => format!("real_@{}", f),
            Some(f) => format!("real_{}.@{}", root, f),
        };
        let find = |p: &InputPart| {
            members
                .iter()
                .find(|b| b.part == *p)
                .and_then(|b| model.get(&b.smt_name))
        };
        if let Some(b) = members.iter().find(|b| b.part == InputPart::Value) {
            if let Some(mv) = model.get(&b.smt_name) {
                out.push((display, render_scalar(mv, mode)));
            }
            continue;
        }
        if members.iter().any(|b| matches!(b.part, InputPart::Len)) {
            let Some(lenv) = find(&InputPart::Len) else { continue };
            let Some(len) = signed(lenv, mode).and_then(|n| usize::try_from(&n).ok()) else {
                continue;
            };
            let mut cells = Vec::new();
            for i in 0..len {
                let s = match find(&InputPart::Cell(i)) {
                    Some(mv) => render_scalar(mv, mode),
                    None => "0".to_string(),
                };
                cells.push(s);
            }
            out.push((display, format!("[{}]", cells.join(", "))));
            continue;
        }
        if members
            .iter()
            .any(|b| matches!(b.part, InputPart::ClassId))
        {
            let Some(idv) = find(&InputPart::ClassId) else { continue };
            let Some(id) = signed(idv, IntMode::Int) else { continue };
            let chosen = members.iter().find_map(|b| match &b.part {
                InputPart::UnionMember(m) => Some((b, m.clone())),
                _ => None,
            });
            // Show the payload for the selected member when the model
            // constrains it; fall back to the class id.
            let mut shown = None;
            for b in &members {
                if let InputPart::UnionMember(m) = &b.part {
                    if member_id_matches(m, &id) {
                        if matches!(m, crate::syntax::ast::BaseName::Nil)
                            || matches!(m, crate::syntax::ast::BaseName::Class(n) if n == "NilClass")
                        {
                            shown = Some("nil".to_string());
                        } else if let Some(mv) = model.get(&b.smt_name) {
                            shown = Some(render_scalar(mv, mode));
                        }
                    }
                }
            }
            let _ = chosen;
            out.push((
                display,
                shown.unwrap_or_else(|| format!("<classid {}>", id)),
            ));
        }
    }
    out
}

fn member_id_matches(m: &crate::syntax::ast::BaseName, id: &BigInt) -> bool {
    use crate::syntax::ast::BaseName;
    let builtin = match m {
        BaseName::Class(n) => match n.as_str() {
            "Integer" => Some(typesys::INTEGER_ID),
            "Float" => Some(typesys::FLOAT_ID),
            "Bool" => Some(typesys::BOOL_ID),
            "NilClass" => Some(typesys::NILCLASS_ID),
            _ => None,
        },
        BaseName::Nil => Some(typesys::NILCLASS_ID),
        BaseName::Array(_) => Some(typesys::ARRAY_ID),
        BaseName::Union(_) => None,
    };
    match builtin {
        Some(b) => BigInt::from(b) == *id,
        // User class ids start at FIRST_USER_CLASS_ID; without the table we
        // accept any non-builtin id here (render-only path).
        None => *id >= BigInt::from(typesys::FIRST_USER_CLASS_ID),
    }
}

// Re-export the evaluator's wrap for interp's use.
pub use vcgen::wrap_bv;
