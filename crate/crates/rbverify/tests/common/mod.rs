//! Shared helpers for the integration-test targets. Each target uses the
//! subset it needs.
#![allow(dead_code)]

use num_bigint::BigInt;
use rbverify::config::{Config, IntMode};
use rbverify::expand;
use rbverify::interp::{COutcome, CValue, Interp};
use rbverify::syntax::{self, MethodSignature};
use rbverify::typesys::{self, ClassTable};
use std::path::PathBuf;

pub const ORACLE_WIDTH: u32 = 8;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_fixture(name: &str) -> String {
    let path = fixture_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {}", path.display(), e))
}

pub fn bv8_config() -> Config {
    Config {
        int_mode: IntMode::Bv(ORACLE_WIDTH),
        ..Config::default()
    }
}

pub fn build_table(src: &str) -> ClassTable {
    let prog = syntax::parse_program(src).expect("fixture must parse");
    let mut table = typesys::build_class_table(&prog).expect("fixture must type");
    expand::expand_generators(&mut table).expect("fixture must expand");
    table
}

/// The unique annotated, bodied method of an oracle-corpus fixture.
pub fn subject(table: &ClassTable) -> (String, String, MethodSignature) {
    let mut found = None;
    for (cname, info) in &table.classes {
        for ((mname, singleton), entry) in &info.methods {
            if entry.sig.is_some() && entry.body.is_some() {
                assert!(!singleton, "corpus subjects are instance methods");
                assert!(
                    found.is_none(),
                    "corpus fixtures carry exactly one annotated method"
                );
                found = Some((cname.clone(), mname.clone(), entry.sig.clone().unwrap()));
            }
        }
    }
    found.expect("corpus fixture has an annotated method")
}

/// Ground truth by running every 8-bit input through the concrete
/// interpreter. Mirrors the goal structure: any postcondition / raise /
/// check failure makes the method UNSAFE; otherwise a capacity overflow
/// makes it BOUND_EXCEEDED; otherwise SAFE.
pub fn enumerate_expected(table: &ClassTable, config: &Config, src_name: &str) -> &'static str {
    let (owner, method, sig) = subject(table);
    let n = sig.params.len();
    assert!(n <= 2, "{}: corpus subjects take at most 2 inputs", src_name);

    let lo = -(1i64 << (ORACLE_WIDTH - 1));
    let hi = (1i64 << (ORACLE_WIDTH - 1)) - 1;
    let mut tuples: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..n {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                (lo..=hi).map(move |v| {
                    let mut t2 = t.clone();
                    t2.push(v);
                    t2
                })
            })
            .collect();
    }

    let mut any_unsafe = false;
    let mut any_capacity = false;
    for tuple in tuples {
        let mut interp = Interp::new(table, config);
        let selfv = interp.alloc_object(&owner);
        let args: Vec<CValue> = tuple.iter().map(|v| CValue::Int(BigInt::from(*v))).collect();
        let bindings: Vec<(String, CValue)> = sig
            .params
            .iter()
            .zip(&args)
            .map(|(p, v)| (p.binder.clone(), v.clone()))
            .collect();

        // Inputs outside the precondition are not part of the query.
        let mut admitted = true;
        for p in &sig.params {
            if p.is_trivial() {
                continue;
            }
            match interp.eval_predicate(&p.predicate, &selfv, &bindings) {
                Ok(true) => {}
                Ok(false) | Err(COutcome::AssumeUnmet) => {
                    admitted = false;
                    break;
                }
                Err(o) => panic!("{}: precondition evaluation failed: {:?}", src_name, o),
            }
        }
        if !admitted {
            continue;
        }

        match interp.run(&owner, &method, false, selfv.clone(), args) {
            COutcome::Normal(v) => {
                let mut post = bindings.clone();
                post.push((sig.result.binder.clone(), v));
                match interp.eval_predicate(&sig.result.predicate, &selfv, &post) {
                    Ok(true) => {}
                    Ok(false) => any_unsafe = true,
                    Err(COutcome::CapacityExceeded) => any_capacity = true,
                    Err(o) => panic!("{}: postcondition evaluation failed: {:?}", src_name, o),
                }
            }
            COutcome::Exception
            | COutcome::PreViolation(_)
            | COutcome::BoundsViolation => any_unsafe = true,
            COutcome::CapacityExceeded => any_capacity = true,
            COutcome::AssumeUnmet => {}
            COutcome::Unsupported(r) => {
                panic!("{}: corpus must stay concretely executable: {}", src_name, r)
            }
        }
    }
    if any_unsafe {
        "UNSAFE"
    } else if any_capacity {
        "BOUND_EXCEEDED"
    } else {
        "SAFE"
    }
}
