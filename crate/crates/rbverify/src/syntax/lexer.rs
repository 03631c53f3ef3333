//! Hand-rolled lexer. Newlines are significant (statement separators), so
//! they are emitted as tokens; the parser collapses runs of them.

use super::ast::Span;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    // Keywords
    Class,
    Module,
    Def,
    End,
    If,
    Then,
    Else,
    Elsif,
    Unless,
    Return,
    Raise,
    SelfKw,
    Nil,
    True,
    False,
    Include,
    AttrAccessor,
    VarType,
    Type,
    Or,

    /// Lowercase identifier, possibly ending in `?`, `!` or `=`.
    Ident(String),
    /// Capitalized identifier (class/module name).
    Const(String),
    /// `:name`, `:@name`, `:<<`, ... (leading `:` stripped, `@` kept)
    Symbol(String),
    /// `name:` as in hash-style keyword arguments (`modifies:`, `t:`).
    LabelKey(String),
    /// `@name` (sigil stripped)
    AtIdent(String),
    Int(String),
    Float(String),
    Str(String),

    // Punctuation / operators
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Semi,
    Newline,
    Arrow, // ->
    OpAssign(String), // += -= *= /= <<=
    Op(String),       // = == != < <= > >= + - * / << && || !

    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Const(s) => format!("constant `{}`", s),
            Tok::Symbol(s) => format!("symbol `:{}`", s),
            Tok::LabelKey(s) => format!("`{}:`", s),
            Tok::AtIdent(s) => format!("`@{}`", s),
            Tok::Int(s) | Tok::Float(s) => format!("number `{}`", s),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Op(s) | Tok::OpAssign(s) => format!("`{}`", s),
            Tok::Newline => "newline".to_string(),
            Tok::Eof => "end of input".to_string(),
            other => format!("{:?}", other).to_lowercase(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lexed {
    pub tok: Tok,
    pub span: Span,
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "class" => Tok::Class,
        "module" => Tok::Module,
        "def" => Tok::Def,
        "end" => Tok::End,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "elsif" => Tok::Elsif,
        "unless" => Tok::Unless,
        "return" => Tok::Return,
        "raise" => Tok::Raise,
        "self" => Tok::SelfKw,
        "nil" => Tok::Nil,
        "true" => Tok::True,
        "false" => Tok::False,
        "include" => Tok::Include,
        "attr_accessor" => Tok::AttrAccessor,
        "var_type" => Tok::VarType,
        "type" => Tok::Type,
        "or" => Tok::Or,
        _ => return None,
    })
}

/// Method names that may appear after `:` in a symbol or after `def`.
pub const OPERATOR_METHODS: &[&str] = &["<<", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/"];

pub struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    /// Added to every span; used when lexing annotation strings embedded in
    /// a larger file so diagnostics point into the original source.
    offset: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str, offset: usize) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            offset,
        }
    }

    fn peek(&self) -> u8 {
        *self.src.get(self.pos).unwrap_or(&0)
    }

    fn peek2(&self) -> u8 {
        *self.src.get(self.pos + 1).unwrap_or(&0)
    }

    fn bump(&mut self) -> u8 {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start + self.offset, self.pos + self.offset)
    }

    fn err(&self, start: usize, msg: impl Into<String>) -> SyntaxError {
        SyntaxError {
            span: self.span_from(start),
            message: msg.into(),
        }
    }

    fn ident_tail(&mut self) {
        while self.peek().is_ascii_alphanumeric() || self.peek() == b'_' {
            self.bump();
        }
        // `?` and `!` may end a method name.
        if self.peek() == b'?' || self.peek() == b'!' {
            self.bump();
        }
    }

    fn lex_string(&mut self, quote: u8, start: usize) -> Result<Tok, SyntaxError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                0 => return Err(self.err(start, "unterminated string literal")),
                b'\\' => {
                    let c = self.bump();
                    match c {
                        b'\\' => out.push('\\'),
                        b'\'' => out.push('\''),
                        b'"' => out.push('"'),
                        b'n' => out.push('\n'),
                        _ => return Err(self.err(start, "unsupported escape in string")),
                    }
                }
                c if c == quote => break,
                c => out.push(c as char),
            }
        }
        Ok(Tok::Str(out))
    }

    fn lex_operator_method(&mut self) -> Option<String> {
        let rest = &self.src[self.pos..];
        for op in OPERATOR_METHODS {
            if rest.starts_with(op.as_bytes()) {
                self.pos += op.len();
                return Some((*op).to_string());
            }
        }
        None
    }

    pub fn tokenize(mut self) -> Result<Vec<Lexed>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            // Skip horizontal whitespace and comments.
            loop {
                match self.peek() {
                    b' ' | b'\t' | b'\r' => {
                        self.bump();
                    }
                    b'#' => {
                        while self.peek() != b'\n' && self.peek() != 0 {
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let start = self.pos;
            let c = self.peek();
            if c == 0 {
                out.push(Lexed {
                    tok: Tok::Eof,
                    span: self.span_from(start),
                });
                return Ok(out);
            }
            let tok = match c {
                b'\n' => {
                    self.bump();
                    Tok::Newline
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'[' => {
                    self.bump();
                    Tok::LBracket
                }
                b']' => {
                    self.bump();
                    Tok::RBracket
                }
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'.' => {
                    self.bump();
                    Tok::Dot
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b'\'' | b'"' => {
                    self.bump();
                    self.lex_string(c, start)?
                }
                b':' => {
                    self.bump();
                    if self.peek() == b'@' {
                        self.bump();
                        let id_start = self.pos;
                        self.ident_tail();
                        if self.pos == id_start {
                            return Err(self.err(start, "expected field name after `:@`"));
                        }
                        let name =
                            String::from_utf8_lossy(&self.src[id_start..self.pos]).into_owned();
                        Tok::Symbol(format!("@{}", name))
                    } else if self.peek().is_ascii_alphabetic() || self.peek() == b'_' {
                        let id_start = self.pos;
                        self.ident_tail();
                        if self.peek() == b'=' && self.peek2() != b'=' {
                            // setter symbol like `:sec=`
                            self.bump();
                        }
                        let name =
                            String::from_utf8_lossy(&self.src[id_start..self.pos]).into_owned();
                        Tok::Symbol(name)
                    } else if let Some(op) = self.lex_operator_method() {
                        Tok::Symbol(op)
                    } else {
                        return Err(self.err(start, "expected name after `:`"));
                    }
                }
                b'@' => {
                    self.bump();
                    let id_start = self.pos;
                    self.ident_tail();
                    if self.pos == id_start {
                        return Err(self.err(start, "expected field name after `@`"));
                    }
                    let name = String::from_utf8_lossy(&self.src[id_start..self.pos]).into_owned();
                    Tok::AtIdent(name)
                }
                b'0'..=b'9' => {
                    while self.peek().is_ascii_digit() {
                        self.bump();
                    }
                    if self.peek() == b'.' && self.peek2().is_ascii_digit() {
                        self.bump();
                        while self.peek().is_ascii_digit() {
                            self.bump();
                        }
                        Tok::Float(
                            String::from_utf8_lossy(&self.src[start..self.pos]).into_owned(),
                        )
                    } else {
                        Tok::Int(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
                    }
                }
                b'-' => {
                    self.bump();
                    if self.peek() == b'>' {
                        self.bump();
                        Tok::Arrow
                    } else if self.peek() == b'=' {
                        self.bump();
                        Tok::OpAssign("-".into())
                    } else {
                        Tok::Op("-".into())
                    }
                }
                b'=' => {
                    self.bump();
                    if self.peek() == b'=' {
                        self.bump();
                        Tok::Op("==".into())
                    } else {
                        Tok::Op("=".into())
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == b'=' {
                        self.bump();
                        Tok::Op("!=".into())
                    } else {
                        Tok::Op("!".into())
                    }
                }
                b'<' => {
                    self.bump();
                    match self.peek() {
                        b'=' => {
                            self.bump();
                            Tok::Op("<=".into())
                        }
                        b'<' => {
                            self.bump();
                            if self.peek() == b'=' {
                                self.bump();
                                Tok::OpAssign("<<".into())
                            } else {
                                Tok::Op("<<".into())
                            }
                        }
                        _ => Tok::Op("<".into()),
                    }
                }
                b'>' => {
                    self.bump();
                    if self.peek() == b'=' {
                        self.bump();
                        Tok::Op(">=".into())
                    } else {
                        Tok::Op(">".into())
                    }
                }
                b'+' => {
                    self.bump();
                    if self.peek() == b'=' {
                        self.bump();
                        Tok::OpAssign("+".into())
                    } else {
                        Tok::Op("+".into())
                    }
                }
                b'*' => {
                    self.bump();
                    if self.peek() == b'=' {
                        self.bump();
                        Tok::OpAssign("*".into())
                    } else {
                        Tok::Op("*".into())
                    }
                }
                b'/' => {
                    self.bump();
                    if self.peek() == b'=' {
                        self.bump();
                        Tok::OpAssign("/".into())
                    } else {
                        Tok::Op("/".into())
                    }
                }
                b'&' => {
                    self.bump();
                    if self.peek() == b'&' {
                        self.bump();
                        Tok::Op("&&".into())
                    } else {
                        return Err(self.err(start, "expected `&&`"));
                    }
                }
                b'|' => {
                    self.bump();
                    if self.peek() == b'|' {
                        self.bump();
                        Tok::Op("||".into())
                    } else {
                        return Err(self.err(start, "expected `||`"));
                    }
                }
                b'a'..=b'z' | b'_' => {
                    self.ident_tail();
                    let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                    // `name:` is a hash-style key (but `name ? :` etc. never
                    // reaches here since `?` is consumed into the ident).
                    if self.peek() == b':' && self.peek2() != b':' && !name.ends_with('?') {
                        self.bump();
                        Tok::LabelKey(name)
                    } else {
                        keyword(&name).unwrap_or(Tok::Ident(name))
                    }
                }
                b'A'..=b'Z' => {
                    self.ident_tail();
                    let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                    Tok::Const(name)
                }
                other => {
                    return Err(self.err(start, format!("unexpected character `{}`", other as char)))
                }
            };
            // `self:` in a modifies hash.
            let tok = if tok == Tok::SelfKw && self.peek() == b':' && self.peek2() != b':' {
                self.bump();
                Tok::LabelKey("self".into())
            } else {
                tok
            };
            out.push(Lexed {
                tok,
                span: self.span_from(start),
            });
        }
    }
}

/// Compute 1-based (line, column) for a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in src.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}
