//! One-shot SMT-LIB 2 evaluator: reads a script on stdin, prints Z3's
//! response on stdout, exits 0. Exists so the verifier can talk to a solver
//! as an external process in environments without a z3/cvc5 binary; any
//! stdin/stdout SMT-LIB solver is a drop-in replacement.

use std::ffi::{CStr, CString};
use std::io::Read;

extern "C" fn ignore_error(_ctx: z3_sys::Z3_context, _code: z3_sys::ErrorCode) {
    // Errors (e.g. `(get-model)` after unsat) surface as `(error ...)` lines
    // in the response; without this handler Z3 would abort the process.
}

fn main() {
    let mut script = String::new();
    if let Err(e) = std::io::stdin().read_to_string(&mut script) {
        eprintln!("smt-shim: failed to read stdin: {}", e);
        std::process::exit(1);
    }
    let script = match CString::new(script) {
        Ok(s) => s,
        Err(_) => {
            eprintln!("smt-shim: input contains a NUL byte");
            std::process::exit(1);
        }
    };
    unsafe {
        let cfg = z3_sys::Z3_mk_config();
        let ctx = z3_sys::Z3_mk_context(cfg);
        z3_sys::Z3_del_config(cfg);
        z3_sys::Z3_set_error_handler(ctx, Some(ignore_error));
        let out = z3_sys::Z3_eval_smtlib2_string(ctx, script.as_ptr());
        print!("{}", CStr::from_ptr(out).to_string_lossy());
        z3_sys::Z3_del_context(ctx);
    }
}
