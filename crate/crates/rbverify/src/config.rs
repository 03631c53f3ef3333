//! Verifier configuration shared across the pipeline.

use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntMode {
    /// Mathematical integers (SMT `Int`), `Float` as `Real`.
    Int,
    /// Two's-complement bitvectors of the given width, with wraparound.
    Bv(u32),
}

impl IntMode {
    pub fn parse(s: &str) -> Result<IntMode, String> {
        if s == "int" {
            return Ok(IntMode::Int);
        }
        if let Some(w) = s.strip_prefix("bv:") {
            let w: u32 = w
                .parse()
                .map_err(|_| format!("invalid bitvector width `{}`", w))?;
            if !(2..=64).contains(&w) {
                return Err(format!("bitvector width {} out of range 2..=64", w));
            }
            return Ok(IntMode::Bv(w));
        }
        Err(format!("invalid int mode `{}` (expected `int` or `bv:W`)", s))
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub int_mode: IntMode,
    /// Fixed capacity of every array (bounded model).
    pub array_bound: usize,
    /// Inline depth for exact calls; exceeding it yields UNKNOWN.
    pub inline_depth: usize,
    pub solver: Option<PathBuf>,
    pub timeout_secs: u64,
    /// Verify only methods carrying this `verify:` label.
    pub label: Option<String>,
    pub dump_ir: bool,
    pub dump_smt: Option<PathBuf>,
    pub json: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            int_mode: IntMode::Int,
            array_bound: 10,
            inline_depth: 16,
            solver: None,
            timeout_secs: 60,
            label: None,
            dump_ir: false,
            dump_smt: None,
            json: false,
        }
    }
}
