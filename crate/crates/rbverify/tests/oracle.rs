//! Soundness-by-oracle: on a corpus of all-exact fixtures in 8-bit
//! bitvector mode, verifier verdicts must match exhaustive concrete
//! enumeration of every input exactly.

mod common;

use rbverify::driver::{self, Verdict};
use std::path::PathBuf;

#[test]
fn verdicts_match_exhaustive_enumeration() {
    let mut files: Vec<PathBuf> = std::fs::read_dir(common::fixture_dir().join("oracle"))
        .expect("corpus directory exists")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "rbl"))
        .collect();
    files.sort();
    assert!(files.len() >= 20, "corpus must hold at least 20 fixtures");

    let config = common::bv8_config();
    let mut seen = std::collections::BTreeSet::new();
    let mut disagreements = Vec::new();
    for f in &files {
        let name = f.file_name().unwrap().to_string_lossy().into_owned();
        let src = std::fs::read_to_string(f).unwrap();
        let table = common::build_table(&src);
        let expected = common::enumerate_expected(&table, &config, &name);

        let out = driver::run(&src, &config, true).expect("pipeline runs");
        assert_eq!(out.reports.len(), 1, "{}: one subject per fixture", name);
        let actual = out.reports[0].verdict.word();
        assert!(
            !matches!(out.reports[0].verdict, Verdict::Unknown { .. }),
            "{}: corpus queries must be decidable",
            name
        );
        if actual != expected {
            disagreements.push(format!("{}: verifier {} vs oracle {}", name, actual, expected));
        }
        seen.insert(expected);
    }
    assert!(
        disagreements.is_empty(),
        "verifier and oracle disagree:\n{}",
        disagreements.join("\n")
    );
    for v in ["SAFE", "UNSAFE", "BOUND_EXCEEDED"] {
        assert!(seen.contains(v), "corpus must exercise {}", v);
    }
}
