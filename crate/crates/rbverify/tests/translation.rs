//! Golden intermediate-representation tests: one source program per
//! translation rule, checked against the exact printed lowering.

use rbverify::config::Config;
use rbverify::driver;

fn ir_dumps(src: &str) -> Vec<(String, String)> {
    let config = Config {
        dump_ir: true,
        ..Config::default()
    };
    driver::run(src, &config, false).expect("translation succeeds").ir_dumps
}

fn ir_of(src: &str) -> String {
    let dumps = ir_dumps(src);
    assert_eq!(dumps.len(), 1, "expected exactly one query");
    dumps[0].1.clone()
}

fn body_of(src: &str) -> String {
    // The funcdef printed right after the query block.
    let ir = ir_of(src);
    let at = ir.find("funcdef").expect("query is followed by its funcdef");
    ir[at..].to_string()
}

fn method(body: &str) -> String {
    format!(
        "class C\n  var_type :@f, 'Integer'\n  type '(Integer x) -> Integer r {{ true }}'\n  def m(x)\n{}\n  end\nend\n",
        body
    )
}

#[test]
fn constants_lower_to_literals() {
    let b = body_of(&method("    42"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  42\n}\n");
}

#[test]
fn variable_reads_are_names() {
    let b = body_of(&method("    y = 1\n    y"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  y := 1\n  y\n}\n");
}

#[test]
fn sequencing_is_flattened_statements() {
    let b = body_of(&method("    1\n    2\n    3"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  1\n  2\n  3\n}\n");
}

#[test]
fn branches_keep_both_arms() {
    let b = body_of(&method("    if x > 0 then 1 else 2 end"));
    assert_eq!(
        b,
        "funcdef C_m(self, x) {\n  if >(x, 0) {\n    1\n  } else {\n    2\n  }\n}\n"
    );
}

#[test]
fn self_is_the_receiver_parameter() {
    let src = "class C\n  type '() -> C r { true }'\n  def me\n    self\n  end\nend\n";
    let b = body_of(src);
    assert_eq!(b, "funcdef C_me(self) {\n  self\n}\n");
}

#[test]
fn local_assignment_is_a_store() {
    let b = body_of(&method("    y = x\n    y"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  y := x\n  y\n}\n");
}

#[test]
fn return_lowers_explicitly() {
    let b = body_of(&method("    return 1\n    2"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  return 1\n  2\n}\n");
}

#[test]
fn field_read_names_the_receiver() {
    let b = body_of(&method("    @f"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  self.f\n}\n");
}

#[test]
fn field_write_is_a_store_on_the_receiver() {
    let b = body_of(&method("    @f = x\n    x"));
    assert_eq!(b, "funcdef C_m(self, x) {\n  self.f := x\n  x\n}\n");
}

#[test]
fn new_lowers_to_an_object_literal() {
    let src = "class H\nend\n\nclass C\n  type '() -> H r { true }'\n  def fresh_h\n    H.new\n  end\nend\n";
    let b = body_of(src);
    assert_eq!(b, "funcdef C_fresh_h(self) {\n  objectlit H\n}\n");
}

#[test]
fn exact_calls_reference_the_callee_funcdef() {
    let src = "class C\n  def inc(v)\n    v + 1\n  end\n\n  type '(Integer x) -> Integer r { true }'\n  def m(x)\n    inc(x)\n  end\nend\n";
    let ir = ir_of(src);
    assert!(ir.contains("funcdef C_m(self, x) {\n  C_inc(self, x)\n}\n"), "{}", ir);
    assert!(ir.contains("funcdef C_inc(self, v) {\n  +(v, 1)\n}\n"), "{}", ir);
}

#[test]
fn pure_calls_become_uninterpreted_applications() {
    let src = "class C\n  type :p, '(Integer i) -> Integer out { out > i }', :pure\n\n  type '(Integer x) -> Integer r { true }'\n  def m(x)\n    p(x)\n  end\nend\n";
    let b = body_of(src);
    assert_eq!(
        b,
        "funcdef C_m(self, x) {\n  let s%1 = self\n  let i%2 = x\n  let out%3 = uninterp%C_p(s%1, i%2)\n  assume >(out%3, i%2)\n  out%3\n}\n"
    );
}

#[test]
fn impure_calls_havoc_then_assume() {
    let src = "class C\n  var_type :@f, 'Integer'\n  type :imp, '(Integer i) -> Integer out { out > i }', modifies: {self: @f}\n\n  type '(Integer x) -> Integer r { true }'\n  def m(x)\n    imp(x)\n  end\nend\n";
    let b = body_of(src);
    assert_eq!(
        b,
        "funcdef C_m(self, x) {\n  let s%1 = self\n  let i%2 = x\n  havoc s%1.f\n  let out%3 = fresh Integer\n  assume >(out%3, i%2)\n  out%3\n}\n"
    );
}

#[test]
fn empty_bodies_evaluate_to_nil() {
    let src = "class C\n  type '() -> Nil n { true }'\n  def noop\n  end\nend\n";
    let b = body_of(src);
    assert_eq!(b, "funcdef C_noop(self) {\n  nil\n}\n");
}

#[test]
fn annotations_alone_produce_no_query() {
    let src = "class C\n  type :p, '(Integer i) -> Integer out { out > i }', :pure\nend\n";
    assert!(ir_dumps(src).is_empty());
}

#[test]
fn definitions_lower_to_funcdefs_with_query() {
    let ir = ir_of(&method("    x"));
    assert_eq!(
        ir,
        "query C_m {\n  symdef self : C\n  symdef x : Integer\n  let %ret = C_m(self, x)\n  guarantee true\n}\nfuncdef C_m(self, x) {\n  x\n}\n"
    );
}

#[test]
fn undeclared_field_is_a_per_method_translation_error() {
    let src = "class C\n  type '(Integer x) -> Integer r { true }'\n  def m(x)\n    @count = x\n    x\n  end\nend\n";
    let config = Config::default();
    let out = driver::run(src, &config, false).unwrap();
    assert_eq!(out.reports.len(), 1);
    let rbverify::driver::Verdict::TranslationError { detail } = &out.reports[0].verdict else {
        panic!("expected TRANSLATION_ERROR, got {:?}", out.reports[0].verdict.word());
    };
    assert!(detail.contains("no declared type for field `@count`"), "{}", detail);
}

#[test]
fn call_arguments_are_bound_once() {
    // The callee's binder appears three times in its refinement; the
    // argument expression must still be evaluated exactly once.
    let src = "class C\n  type :thrice, '(Integer i) -> Integer out { out == i + i + i }', :pure\n\n  type '(Integer x) -> Integer r { true }'\n  def m(x)\n    thrice(x + 1)\n  end\nend\n";
    let b = body_of(src);
    assert_eq!(b.matches("+(x, 1)").count(), 1, "{}", b);
    assert!(b.contains("+(+(i%2, i%2), i%2)"), "{}", b);
}
