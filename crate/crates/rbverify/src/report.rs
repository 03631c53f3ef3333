//! Per-method verdict rendering, text and JSON.

use crate::driver::{MethodReport, Verdict};
use crate::interp::Replay;
use serde_json::json;
use std::fmt::Write;

fn subject(r: &MethodReport) -> String {
    let kind = if r.singleton {
        "class method"
    } else {
        "instance method"
    };
    let mut s = format!("{} {} {}", r.owner, kind, r.method);
    if let Some(m) = &r.obligation_of {
        write!(s, " (obligation from {})", m).unwrap();
    }
    s
}

fn replay_note(replay: &Replay) -> Option<String> {
    match replay {
        Replay::Confirmed => Some("replay: confirmed".into()),
        Replay::NotConfirmed(r) => Some(format!("replay: NOT confirmed ({})", r)),
        Replay::Skipped(r) => Some(format!("not replay-validated: {}", r)),
    }
}

pub fn render_text(reports: &[MethodReport], with_times: bool) -> String {
    let mut out = String::new();
    for r in reports {
        let line = match &r.verdict {
            Verdict::Safe => format!("{} is safe.", subject(r)),
            Verdict::Unsafe(cex) => {
                let bindings: Vec<String> = cex
                    .bindings
                    .iter()
                    .map(|(n, v)| format!("{} = {}", n, v))
                    .collect();
                let mut s = format!(
                    "{} is unsafe. Counterexample: {}. Trigger: {}.",
                    subject(r),
                    if bindings.is_empty() {
                        "(empty)".to_string()
                    } else {
                        bindings.join(", ")
                    },
                    cex.trigger.describe()
                );
                if let Some(n) = replay_note(&cex.replay) {
                    write!(s, " [{}]", n).unwrap();
                }
                s
            }
            Verdict::Unknown { reason } => {
                format!("{} could not be verified: {}.", subject(r), reason)
            }
            Verdict::BoundExceeded(cex) => {
                let mut s = format!("{} exceeds the array capacity bound.", subject(r));
                if let Some(cex) = cex {
                    let bindings: Vec<String> = cex
                        .bindings
                        .iter()
                        .map(|(n, v)| format!("{} = {}", n, v))
                        .collect();
                    if !bindings.is_empty() {
                        write!(s, " Counterexample: {}.", bindings.join(", ")).unwrap();
                    }
                    if let Some(n) = replay_note(&cex.replay) {
                        write!(s, " [{}]", n).unwrap();
                    }
                }
                s
            }
            Verdict::TranslationError { detail } => {
                format!("{} failed to translate: {}", subject(r), detail)
            }
        };
        out.push_str(&line);
        if with_times {
            write!(out, " ({} ms)", r.wall.as_millis()).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn render_json(reports: &[MethodReport]) -> String {
    let rows: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            let mut row = json!({
                "owner": r.owner,
                "method": r.method,
                "singleton": r.singleton,
                "obligationOf": r.obligation_of,
                "verdict": r.verdict.word(),
                "wallMs": r.wall.as_millis() as u64,
            });
            match &r.verdict {
                Verdict::Unsafe(cex) | Verdict::BoundExceeded(Some(cex)) => {
                    row["counterexample"] = json!({
                        "bindings": cex.bindings.iter()
                            .map(|(n, v)| json!({"name": n, "value": v}))
                            .collect::<Vec<_>>(),
                        "trigger": cex.trigger.describe(),
                        "replay": match &cex.replay {
                            Replay::Confirmed => json!("confirmed"),
                            Replay::NotConfirmed(m) => json!({"notConfirmed": m}),
                            Replay::Skipped(m) => json!({"skipped": m}),
                        },
                    });
                }
                Verdict::Unknown { reason } => {
                    row["reason"] = json!(reason);
                }
                Verdict::TranslationError { detail } => {
                    row["detail"] = json!(detail);
                }
                _ => {}
            }
            row
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "methods": rows })).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::Counterexample;
    use crate::interp::Trigger;
    use std::time::Duration;

    fn report(verdict: Verdict) -> MethodReport {
        MethodReport {
            owner: "Time".into(),
            method: "incr_sec".into(),
            singleton: false,
            obligation_of: None,
            verdict,
            wall: Duration::from_millis(12),
        }
    }

    #[test]
    fn safe_line_matches_paper_wording() {
        let out = render_text(&[report(Verdict::Safe)], false);
        assert_eq!(out, "Time instance method incr_sec is safe.\n");
    }

    #[test]
    fn unsafe_line_lists_bindings_trigger_and_replay() {
        let cex = Counterexample {
            bindings: vec![("real_x".into(), "59".into())],
            trigger: Trigger::Postcondition,
            replay: Replay::Confirmed,
        };
        let out = render_text(&[report(Verdict::Unsafe(cex))], false);
        assert_eq!(
            out,
            "Time instance method incr_sec is unsafe. Counterexample: real_x = 59. \
             Trigger: postconditionViolated. [replay: confirmed]\n"
        );
    }

    #[test]
    fn obligation_rows_name_the_module() {
        let mut r = report(Verdict::Safe);
        r.owner = "Money".into();
        r.method = "value".into();
        r.obligation_of = Some("Arithmetic".into());
        let out = render_text(&[r], false);
        assert_eq!(
            out,
            "Money instance method value (obligation from Arithmetic) is safe.\n"
        );
    }

    #[test]
    fn times_append_in_milliseconds() {
        let out = render_text(&[report(Verdict::Safe)], true);
        assert_eq!(out, "Time instance method incr_sec is safe. (12 ms)\n");
    }

    #[test]
    fn json_report_round_trips() {
        let cex = Counterexample {
            bindings: vec![("real_x".into(), "59".into())],
            trigger: Trigger::Raise,
            replay: Replay::Skipped("no body".into()),
        };
        let out = render_json(&[report(Verdict::Unsafe(cex))]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["methods"][0]["verdict"], "UNSAFE");
        assert_eq!(v["methods"][0]["counterexample"]["trigger"], "exceptionRaised");
        assert_eq!(
            v["methods"][0]["counterexample"]["replay"]["skipped"],
            "no body"
        );
    }

    #[test]
    fn unknown_and_translation_error_lines() {
        let out = render_text(
            &[
                report(Verdict::Unknown { reason: "solver returned unknown".into() }),
                report(Verdict::TranslationError { detail: "untyped receiver".into() }),
            ],
            false,
        );
        assert_eq!(
            out,
            "Time instance method incr_sec could not be verified: solver returned unknown.\n\
             Time instance method incr_sec failed to translate: untyped receiver\n"
        );
    }
}
