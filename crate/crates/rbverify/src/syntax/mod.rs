//! Surface syntax: lexer, parser, AST, and pretty-printer for `.rbl` files
//! and the annotation strings embedded in them.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

use thiserror::Error;

pub use ast::*;
pub use lexer::line_col;
pub use parser::{check_predicate_purity, parse_base_name, parse_program, parse_signature};
pub use printer::{expr_str, pretty_print, signature_str};

/// A malformed-input diagnostic with a location.
#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

#[derive(Debug, Clone, Error)]
pub enum ParseError {
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("duplicate definition of `{method}` in `{owner}`")]
    DuplicateDefinition {
        owner: String,
        method: String,
        span: Span,
    },
    #[error("{message}")]
    Purity { span: Span, message: String },
}

impl From<SyntaxError> for ParseError {
    fn from(e: SyntaxError) -> Self {
        ParseError::Syntax(e)
    }
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax(e) => e.span,
            ParseError::DuplicateDefinition { span, .. } => *span,
            ParseError::Purity { span, .. } => *span,
        }
    }
}
