//! Command-line entry point. Exit codes: 0 all selected methods SAFE,
//! 1 verification failures, 2 usage errors, 3 I/O errors.

use crate::config::{Config, IntMode};
use crate::driver::{self, Verdict};
use crate::report;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "rbverify", version, about = "Refinement-type verifier")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify annotated methods in the given source files.
    Verify(CommonArgs),
    /// Write IR and/or SMT artifacts without solving.
    Dump(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Source files forming one program, concatenated in order.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// `int` (mathematical integers) or `bv:W` (W-bit two's complement).
    #[arg(long, default_value = "int")]
    int_mode: String,
    /// Fixed array capacity.
    #[arg(long, default_value_t = 10)]
    array_bound: usize,
    /// SMT solver executable (default: RBVERIFY_SOLVER, then a bundled
    /// `smt-shim` next to this binary).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-goal solver timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Verify only methods carrying this `verify:` label.
    #[arg(long)]
    label: Option<String>,
    /// Print each verification query's IR to stdout.
    #[arg(long)]
    dump_ir: bool,
    /// Write one .smt2 file per solver goal into this directory.
    #[arg(long)]
    dump_smt: Option<PathBuf>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

fn to_config(a: &CommonArgs) -> Result<Config, String> {
    if a.array_bound == 0 {
        return Err("--array-bound must be at least 1".into());
    }
    Ok(Config {
        int_mode: IntMode::parse(&a.int_mode)?,
        array_bound: a.array_bound,
        inline_depth: Config::default().inline_depth,
        solver: a.solver.clone(),
        timeout_secs: a.timeout,
        label: a.label.clone(),
        dump_ir: a.dump_ir,
        dump_smt: a.dump_smt.clone(),
        json: a.json,
    })
}

fn read_sources(files: &[PathBuf]) -> Result<String, String> {
    let mut src = String::new();
    for f in files {
        let text = std::fs::read_to_string(f)
            .map_err(|e| format!("cannot read {}: {}", f.display(), e))?;
        src.push_str(&text);
        if !src.ends_with('\n') {
            src.push('\n');
        }
    }
    Ok(src)
}

fn write_dumps(out: &driver::RunOutput, config: &Config) -> Result<(), String> {
    for (name, text) in &out.ir_dumps {
        println!("; ir for {}", name);
        println!("{}", text);
    }
    if let Some(dir) = &config.dump_smt {
        std::fs::create_dir_all(dir)
            .map_err(|e| format!("cannot create {}: {}", dir.display(), e))?;
        for (file, script) in &out.smt_dumps {
            let path = dir.join(file);
            std::fs::write(&path, script)
                .map_err(|e| format!("cannot write {}: {}", path.display(), e))?;
        }
    }
    Ok(())
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version are not usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (args, solve) = match &cli.cmd {
        Cmd::Verify(a) => (a, true),
        Cmd::Dump(a) => (a, false),
    };
    let config = match to_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e);
            return 2;
        }
    };
    let src = match read_sources(&args.files) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}", e);
            return 3;
        }
    };
    let out = match driver::run(&src, &config, solve) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}", e);
            return 1;
        }
    };
    if let Err(e) = write_dumps(&out, &config) {
        eprintln!("error: {}", e);
        return 3;
    }
    if !solve {
        return 0;
    }
    if config.json {
        println!("{}", report::render_json(&out.reports));
    } else {
        print!("{}", report::render_text(&out.reports, true));
    }
    let all_safe = out
        .reports
        .iter()
        .all(|r| matches!(r.verdict, Verdict::Safe));
    if all_safe {
        0
    } else {
        1
    }
}
