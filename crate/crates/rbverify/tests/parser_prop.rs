//! Property test: pretty-printing a parsed program and reparsing it gives
//! the same AST, for randomly generated expression bodies.

use proptest::prelude::*;
use rbverify::syntax::{parse_program, pretty_print};

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        (0i64..200).prop_map(|n| n.to_string()),
        Just("x".to_string()),
        Just("y".to_string()),
        Just("@f".to_string()),
        Just("true".to_string()),
        Just("false".to_string()),
        Just("nil".to_string()),
        Just("self".to_string()),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    let ops = prop_oneof![
        Just("+"),
        Just("-"),
        Just("*"),
        Just("/"),
        Just("=="),
        Just("!="),
        Just("<"),
        Just("<="),
        Just(">"),
        Just(">="),
        Just("&&"),
        Just("||"),
    ];
    atom().prop_recursive(4, 48, 3, move |inner| {
        prop_oneof![
            (inner.clone(), ops.clone(), inner.clone())
                .prop_map(|(a, op, b)| format!("({} {} {})", a, op, b)),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(c, t, e)| format!("(if {} then {} else {} end)", c, t, e)),
            inner.clone().prop_map(|a| format!("!({})", a)),
            inner.clone().prop_map(|a| format!("(-({}))", a)),
            inner.prop_map(|a| format!("helper({})", a)),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(body in expr()) {
        let src = format!(
            "class C\n  var_type :@f, 'Integer'\n  def helper(v)\n    v\n  end\n  def m(x, y)\n    {}\n  end\nend\n",
            body
        );
        let p1 = parse_program(&src).expect("generated program parses");
        let printed = pretty_print(&p1);
        let p2 = parse_program(&printed)
            .unwrap_or_else(|e| panic!("reparse failed: {}\n{}", e, printed));
        prop_assert_eq!(p1, p2, "round trip mismatch:\n{}", printed);
    }
}
