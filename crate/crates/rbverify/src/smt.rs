//! SMT-LIB 2 emission, the external solver process, and model parsing.

use crate::vcgen::term::{Op, Sort, Term};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::HashMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// Map an internal name onto the SMT-LIB symbol alphabet, reversibly:
/// `[A-Za-z0-9_]` passes through, anything else becomes `$xx` (hex).
pub fn sanitize(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for b in name.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("${:02x}", b));
        }
    }
    out
}

pub fn desanitize(name: &str) -> String {
    let bytes = name.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' && i + 2 < bytes.len() {
            if let Ok(b) = u8::from_str_radix(&name[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

pub fn sort_smt(s: &Sort) -> String {
    match s {
        Sort::Bool => "Bool".into(),
        Sort::Int => "Int".into(),
        Sort::Real => "Real".into(),
        Sort::BitVec(w) => format!("(_ BitVec {})", w),
    }
}

fn op_smt(op: Op) -> &'static str {
    match op {
        Op::And => "and",
        Op::Or => "or",
        Op::Not => "not",
        Op::Implies => "=>",
        Op::Eq => "=",
        Op::Ite => "ite",
        Op::Add => "+",
        Op::Sub => "-",
        Op::Mul => "*",
        Op::IntDiv => "div",
        Op::Mod => "mod",
        Op::RealDiv => "/",
        Op::Neg => "-",
        Op::Le => "<=",
        Op::Lt => "<",
        Op::Ge => ">=",
        Op::Gt => ">",
        Op::ToReal => "to_real",
        Op::BvAdd => "bvadd",
        Op::BvSub => "bvsub",
        Op::BvMul => "bvmul",
        Op::BvSdiv => "bvsdiv",
        Op::BvSrem => "bvsrem",
        Op::BvNeg => "bvneg",
        Op::BvSle => "bvsle",
        Op::BvSlt => "bvslt",
        Op::BvSge => "bvsge",
        Op::BvSgt => "bvsgt",
    }
}

pub fn term_smt(t: &Term) -> String {
    match t {
        Term::BoolLit(b) => b.to_string(),
        Term::IntLit(n) => {
            if n.sign() == num_bigint::Sign::Minus {
                format!("(- {})", -n)
            } else {
                n.to_string()
            }
        }
        Term::RealLit(s) => {
            if let Some(rest) = s.strip_prefix('-') {
                format!("(- {})", rest)
            } else {
                s.clone()
            }
        }
        Term::BvLit(n, w) => format!("(_ bv{} {})", n, w),
        Term::Const(n) => sanitize(n),
        Term::App(op, args) => {
            let parts: Vec<String> = args.iter().map(term_smt).collect();
            format!("({} {})", op_smt(*op), parts.join(" "))
        }
        Term::Uf(n, args) => {
            if args.is_empty() {
                sanitize(n)
            } else {
                let parts: Vec<String> = args.iter().map(term_smt).collect();
                format!("({} {})", sanitize(n), parts.join(" "))
            }
        }
    }
}

/// A complete one-shot script asserting `asserts`, plus marker booleans
/// constrained to equal their terms so models classify which fired.
pub fn build_script(
    decls: &[(String, Sort)],
    ufs: &[(String, Vec<Sort>, Sort)],
    asserts: &[Term],
    markers: &[(String, Term)],
) -> String {
    let mut s = String::new();
    s.push_str("(set-option :produce-models true)\n");
    for (n, sort) in decls {
        s.push_str(&format!(
            "(declare-const {} {})\n",
            sanitize(n),
            sort_smt(sort)
        ));
    }
    for (n, args, res) in ufs {
        let a: Vec<String> = args.iter().map(sort_smt).collect();
        s.push_str(&format!(
            "(declare-fun {} ({}) {})\n",
            sanitize(n),
            a.join(" "),
            sort_smt(res)
        ));
    }
    for (n, _) in markers {
        s.push_str(&format!("(declare-const {} Bool)\n", sanitize(n)));
    }
    for (n, t) in markers {
        s.push_str(&format!(
            "(assert (= {} {}))\n",
            sanitize(n),
            term_smt(t)
        ));
    }
    for t in asserts {
        s.push_str(&format!("(assert {})\n", term_smt(t)));
    }
    s.push_str("(check-sat)\n(get-model)\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverVerdict {
    Sat(Model),
    Unsat,
    Unknown,
    Timeout,
}

#[derive(Debug, Clone)]
pub enum SolverError {
    NotFound(String),
    Io(String),
    Garbled(String),
}

impl std::fmt::Display for SolverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverError::NotFound(m) => write!(f, "solver not found: {}", m),
            SolverError::Io(m) => write!(f, "solver i/o error: {}", m),
            SolverError::Garbled(m) => write!(f, "unparseable solver output: {}", m),
        }
    }
}

/// Locate the solver: explicit config, then `RBVERIFY_SOLVER`, then an
/// `smt-shim` binary next to the running executable.
pub fn find_solver(configured: Option<&PathBuf>) -> Result<PathBuf, SolverError> {
    if let Some(p) = configured {
        return Ok(p.clone());
    }
    if let Ok(p) = std::env::var("RBVERIFY_SOLVER") {
        if !p.is_empty() {
            return Ok(PathBuf::from(p));
        }
    }
    if let Ok(exe) = std::env::current_exe() {
        if let Some(dir) = exe.parent() {
            let cand = dir.join("smt-shim");
            if cand.exists() {
                return Ok(cand);
            }
            // Tests run from target/<profile>/deps; the shim sits one up.
            if let Some(up) = dir.parent() {
                let cand = up.join("smt-shim");
                if cand.exists() {
                    return Ok(cand);
                }
            }
        }
    }
    Err(SolverError::NotFound(
        "no --solver, RBVERIFY_SOLVER unset, and no smt-shim next to the executable".into(),
    ))
}

/// Run the solver on one script with a wall-clock timeout. The solver is a
/// one-shot process: script on stdin, result and optional model on stdout.
pub fn run_solver(
    solver: &PathBuf,
    script: &str,
    timeout: Duration,
) -> Result<SolverVerdict, SolverError> {
    let mut child = Command::new(solver)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SolverError::NotFound(format!("{}: {}", solver.display(), e)))?;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(script.as_bytes())
        .map_err(|e| SolverError::Io(e.to_string()))?;
    let mut stdout = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        use std::io::Read;
        let _ = stdout.read_to_string(&mut buf);
        buf
    });
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(SolverVerdict::Timeout);
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(SolverError::Io(e.to_string())),
        }
    }
    let out = reader.join().unwrap_or_default();
    parse_solver_output(&out)
}

pub fn parse_solver_output(out: &str) -> Result<SolverVerdict, SolverError> {
    let mut status = None;
    let mut rest = String::new();
    for line in out.lines() {
        let l = line.trim();
        if status.is_none() {
            match l {
                "sat" | "unsat" | "unknown" => {
                    status = Some(l.to_string());
                    continue;
                }
                _ if l.starts_with("(error") || l.is_empty() => continue,
                _ => {
                    return Err(SolverError::Garbled(format!("unexpected line `{}`", l)));
                }
            }
        }
        if !l.starts_with("(error") {
            rest.push_str(line);
            rest.push('\n');
        }
    }
    match status.as_deref() {
        Some("unsat") => Ok(SolverVerdict::Unsat),
        Some("unknown") => Ok(SolverVerdict::Unknown),
        Some("sat") => Ok(SolverVerdict::Sat(parse_model(&rest)?)),
        _ => Err(SolverError::Garbled(format!(
            "no verdict line in {:?}",
            out
        ))),
    }
}

// ---- model values ----

#[derive(Debug, Clone, PartialEq)]
pub enum ModelValue {
    Bool(bool),
    Int(BigInt),
    Real(BigRational),
}

impl ModelValue {
    pub fn render(&self) -> String {
        match self {
            ModelValue::Bool(b) => b.to_string(),
            ModelValue::Int(n) => n.to_string(),
            ModelValue::Real(r) => {
                if r.is_integer() {
                    format!("{}.0", r.numer())
                } else {
                    // Exact decimal when the denominator is 2^a * 5^b,
                    // otherwise the exact fraction.
                    match exact_decimal(r) {
                        Some(d) => d,
                        None => format!("{}/{}", r.numer(), r.denom()),
                    }
                }
            }
        }
    }
}

fn exact_decimal(r: &BigRational) -> Option<String> {
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two) == BigInt::from(0) {
        den /= &two;
        twos += 1;
    }
    while (&den % &five) == BigInt::from(0) {
        den /= &five;
        fives += 1;
    }
    if den != BigInt::from(1) || twos.max(fives) > 30 {
        return None;
    }
    let shift = twos.max(fives);
    let scale = BigInt::from(10).pow(shift);
    let scaled = r.numer() * &scale / r.denom();
    let neg = scaled.sign() == num_bigint::Sign::Minus;
    let digits = scaled.magnitude().to_string();
    let digits = format!("{:0>width$}", digits, width = (shift as usize) + 1);
    let (int_part, frac) = digits.split_at(digits.len() - shift as usize);
    Some(format!(
        "{}{}.{}",
        if neg { "-" } else { "" },
        int_part,
        frac
    ))
}

/// Interpretation of an uninterpreted function in a model: guarded cases
/// over argument tuples plus a default.
#[derive(Debug, Clone, PartialEq)]
pub struct UfInterp {
    pub arity: usize,
    pub cases: Vec<(Vec<ModelValue>, ModelValue)>,
    pub default: ModelValue,
}

impl UfInterp {
    pub fn apply(&self, args: &[ModelValue]) -> ModelValue {
        for (pat, v) in &self.cases {
            if pat == args {
                return v.clone();
            }
        }
        self.default.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Model {
    pub consts: HashMap<String, ModelValue>,
    pub ufs: HashMap<String, UfInterp>,
}

impl Model {
    /// Look up by internal (pre-sanitization) name.
    pub fn get(&self, name: &str) -> Option<&ModelValue> {
        self.consts.get(&sanitize(name))
    }

    pub fn get_uf(&self, name: &str) -> Option<&UfInterp> {
        self.ufs.get(&sanitize(name))
    }
}

// ---- s-expressions ----

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

impl Sexpr {
    fn atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s) => Some(s),
            _ => None,
        }
    }
}

pub fn parse_sexprs(input: &str) -> Result<Vec<Sexpr>, SolverError> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut chars = input.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            ';' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                // Quoted symbol.
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    cur.push(c);
                }
                toks.push(std::mem::take(&mut cur));
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    let mut stack: Vec<Vec<Sexpr>> = vec![Vec::new()];
    for t in toks {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack
                    .pop()
                    .ok_or_else(|| SolverError::Garbled("unbalanced )".into()))?;
                stack
                    .last_mut()
                    .ok_or_else(|| SolverError::Garbled("unbalanced )".into()))?
                    .push(Sexpr::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexpr::Atom(t)),
        }
    }
    if stack.len() != 1 {
        return Err(SolverError::Garbled("unbalanced (".into()));
    }
    Ok(stack.pop().unwrap())
}

pub fn parse_model(text: &str) -> Result<Model, SolverError> {
    let top = parse_sexprs(text)?;
    let mut model = Model::default();
    // The model prints as one list of define-funs, possibly headed by the
    // atom `model` in older solvers.
    let entries: Vec<&Sexpr> = match top.first() {
        Some(Sexpr::List(items)) => items
            .iter()
            .filter(|e| e.atom() != Some("model"))
            .collect(),
        _ => Vec::new(),
    };
    for e in entries {
        let Sexpr::List(parts) = e else { continue };
        if parts.first().and_then(|a| a.atom()) != Some("define-fun") {
            continue;
        }
        if parts.len() < 5 {
            continue;
        }
        let Some(name) = parts[1].atom() else { continue };
        let Sexpr::List(args) = &parts[2] else { continue };
        if args.is_empty() {
            if let Some(v) = parse_value(&parts[4]) {
                model.consts.insert(name.to_string(), v);
            }
        } else {
            // Argument names x!0.. appear in order; bodies are ite chains
            // over equalities on them.
            let argnames: Vec<String> = args
                .iter()
                .filter_map(|a| match a {
                    Sexpr::List(p) => p.first().and_then(|x| x.atom()).map(|s| s.to_string()),
                    _ => None,
                })
                .collect();
            if let Some(interp) = parse_uf_body(&argnames, &parts[4]) {
                model.ufs.insert(name.to_string(), interp);
            }
        }
    }
    Ok(model)
}

pub fn parse_value(e: &Sexpr) -> Option<ModelValue> {
    match e {
        Sexpr::Atom(a) => {
            if a == "true" {
                return Some(ModelValue::Bool(true));
            }
            if a == "false" {
                return Some(ModelValue::Bool(false));
            }
            if let Some(hex) = a.strip_prefix("#x") {
                return BigInt::parse_bytes(hex.as_bytes(), 16).map(ModelValue::Int);
            }
            if let Some(bin) = a.strip_prefix("#b") {
                return BigInt::parse_bytes(bin.as_bytes(), 2).map(ModelValue::Int);
            }
            if a.contains('.') {
                return parse_decimal(a);
            }
            a.parse::<BigInt>().ok().map(ModelValue::Int)
        }
        Sexpr::List(parts) => {
            let head = parts.first()?.atom()?;
            match head {
                "-" if parts.len() == 2 => match parse_value(&parts[1])? {
                    ModelValue::Int(n) => Some(ModelValue::Int(-n)),
                    ModelValue::Real(r) => Some(ModelValue::Real(-r)),
                    v => Some(v),
                },
                "/" if parts.len() == 3 => {
                    let n = parse_value(&parts[1])?;
                    let d = parse_value(&parts[2])?;
                    let to_rat = |v: ModelValue| match v {
                        ModelValue::Int(n) => Some(BigRational::from(n)),
                        ModelValue::Real(r) => Some(r),
                        _ => None,
                    };
                    Some(ModelValue::Real(to_rat(n)? / to_rat(d)?))
                }
                "_" if parts.len() == 3 => {
                    // (_ bvN w)
                    let a = parts[1].atom()?;
                    let n = a.strip_prefix("bv")?;
                    n.parse::<BigInt>().ok().map(ModelValue::Int)
                }
                _ => None,
            }
        }
    }
}

fn parse_decimal(a: &str) -> Option<ModelValue> {
    let (int_part, frac) = a.split_once('.')?;
    let neg = int_part.starts_with('-');
    let i: BigInt = if int_part.is_empty() || int_part == "-" {
        BigInt::from(0)
    } else {
        int_part.parse().ok()?
    };
    let scale = BigInt::from(10).pow(frac.len() as u32);
    let f: BigInt = if frac.is_empty() {
        BigInt::from(0)
    } else {
        frac.parse().ok()?
    };
    let mag = i.magnitude().clone() * scale.magnitude() + f.magnitude();
    let num = BigInt::from_biguint(
        if neg {
            num_bigint::Sign::Minus
        } else {
            num_bigint::Sign::Plus
        },
        mag,
    );
    Some(ModelValue::Real(BigRational::new(num, scale)))
}

fn parse_uf_body(argnames: &[String], body: &Sexpr) -> Option<UfInterp> {
    let mut cases = Vec::new();
    let mut cur = body;
    loop {
        match cur {
            Sexpr::List(parts)
                if parts.first().and_then(|a| a.atom()) == Some("ite") && parts.len() == 4 =>
            {
                let pat = parse_uf_guard(argnames, &parts[1])?;
                let val = parse_value(&parts[2])?;
                cases.push((pat, val));
                cur = &parts[3];
            }
            other => {
                let default = parse_value(other)?;
                return Some(UfInterp {
                    arity: argnames.len(),
                    cases,
                    default,
                });
            }
        }
    }
}

/// A guard `(= x!i v)` or a conjunction of such; yields the argument tuple
/// it matches (missing positions filled from later conjuncts).
fn parse_uf_guard(argnames: &[String], guard: &Sexpr) -> Option<Vec<ModelValue>> {
    let mut slots: Vec<Option<ModelValue>> = vec![None; argnames.len()];
    fn fill(
        argnames: &[String],
        slots: &mut [Option<ModelValue>],
        e: &Sexpr,
    ) -> Option<()> {
        let Sexpr::List(parts) = e else { return None };
        match parts.first()?.atom()? {
            "and" => {
                for p in &parts[1..] {
                    fill(argnames, slots, p)?;
                }
                Some(())
            }
            "=" if parts.len() == 3 => {
                let (name, vexpr) = match (&parts[1], &parts[2]) {
                    (Sexpr::Atom(a), v) if argnames.contains(a) => (a.clone(), v),
                    (v, Sexpr::Atom(a)) if argnames.contains(a) => (a.clone(), v),
                    _ => return None,
                };
                let idx = argnames.iter().position(|n| *n == name)?;
                slots[idx] = Some(parse_value(vexpr)?);
                Some(())
            }
            _ => None,
        }
    }
    fill(argnames, &mut slots, guard)?;
    slots.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_round_trips() {
        for n in ["real_x", "real_@min", "real_t1.@sec", "a%3", "x$Integer", "uninterp%Time_sec"] {
            assert_eq!(desanitize(&sanitize(n)), n);
            for c in sanitize(n).chars() {
                assert!(c.is_ascii_alphanumeric() || c == '_' || c == '$');
            }
        }
    }

    #[test]
    fn sanitize_is_injective_on_samples() {
        let names = ["a.b", "a$62b", "a_b", "a%b", "a@b"];
        let mut seen = std::collections::HashSet::new();
        for n in names {
            assert!(seen.insert(sanitize(n)), "collision for {}", n);
        }
    }

    #[test]
    fn parses_plain_verdicts() {
        assert_eq!(parse_solver_output("unsat\n").unwrap(), SolverVerdict::Unsat);
        assert_eq!(
            parse_solver_output("unknown\n").unwrap(),
            SolverVerdict::Unknown
        );
        // Error chatter from (get-model) after unsat is tolerated.
        assert_eq!(
            parse_solver_output("unsat\n(error \"line 5: model is not available\")\n").unwrap(),
            SolverVerdict::Unsat
        );
    }

    #[test]
    fn parses_const_model() {
        let out = "sat\n(\n  (define-fun x () Int 6)\n  (define-fun y () Int (- 4))\n  (define-fun b () Bool true)\n  (define-fun r () Real (/ 1.0 3.0))\n  (define-fun w () (_ BitVec 8) #x2a)\n)\n";
        let SolverVerdict::Sat(m) = parse_solver_output(out).unwrap() else {
            panic!("expected sat");
        };
        assert_eq!(m.get("x"), Some(&ModelValue::Int(BigInt::from(6))));
        assert_eq!(m.get("y"), Some(&ModelValue::Int(BigInt::from(-4))));
        assert_eq!(m.get("b"), Some(&ModelValue::Bool(true)));
        assert_eq!(
            m.get("r"),
            Some(&ModelValue::Real(BigRational::new(
                BigInt::from(1),
                BigInt::from(3)
            )))
        );
        assert_eq!(m.get("w"), Some(&ModelValue::Int(BigInt::from(0x2a))));
    }

    #[test]
    fn parses_uf_model() {
        let out = "sat\n(\n  (define-fun f ((x!0 Int)) Int (ite (= x!0 2) 9 7))\n)\n";
        let SolverVerdict::Sat(m) = parse_solver_output(out).unwrap() else {
            panic!("expected sat");
        };
        let f = m.get_uf("f").unwrap();
        assert_eq!(f.apply(&[ModelValue::Int(BigInt::from(2))]), ModelValue::Int(BigInt::from(9)));
        assert_eq!(f.apply(&[ModelValue::Int(BigInt::from(5))]), ModelValue::Int(BigInt::from(7)));
    }

    #[test]
    fn parses_binary_uf_model() {
        let out = "sat\n(\n  (define-fun g ((x!0 Int) (x!1 Int)) Int\n    (ite (and (= x!0 1) (= x!1 2)) 3 0))\n)\n";
        let SolverVerdict::Sat(m) = parse_solver_output(out).unwrap() else {
            panic!("expected sat");
        };
        let g = m.get_uf("g").unwrap();
        assert_eq!(
            g.apply(&[ModelValue::Int(BigInt::from(1)), ModelValue::Int(BigInt::from(2))]),
            ModelValue::Int(BigInt::from(3))
        );
        assert_eq!(
            g.apply(&[ModelValue::Int(BigInt::from(9)), ModelValue::Int(BigInt::from(9))]),
            ModelValue::Int(BigInt::from(0))
        );
    }

    #[test]
    fn renders_model_values() {
        assert_eq!(ModelValue::Int(BigInt::from(-3)).render(), "-3");
        assert_eq!(
            ModelValue::Real(BigRational::new(BigInt::from(1), BigInt::from(4))).render(),
            "0.25"
        );
        assert_eq!(
            ModelValue::Real(BigRational::new(BigInt::from(1), BigInt::from(3))).render(),
            "1/3"
        );
        assert_eq!(
            ModelValue::Real(BigRational::from(BigInt::from(2))).render(),
            "2.0"
        );
    }

    #[test]
    fn emits_negative_literals_prefix_form() {
        assert_eq!(term_smt(&Term::int(-5)), "(- 5)");
        assert_eq!(term_smt(&Term::RealLit("-2.5".into())), "(- 2.5)");
        assert_eq!(term_smt(&Term::BvLit(BigInt::from(250), 8)), "(_ bv250 8)");
    }
}
