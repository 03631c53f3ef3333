//! Recursive-descent parser for `.rbl` programs and annotation strings.
//!
//! Sugar (`&&`, `||`, `!`, trailing `if`/`unless`, chained comparisons,
//! op-assignment, index syntax) is desugared here, so the rest of the
//! pipeline only ever sees core expression forms.

use super::ast::*;
use super::lexer::{Lexed, Lexer, Tok};
use super::{ParseError, SyntaxError};
use num_bigint::BigInt;
use std::collections::HashSet;

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(source, 0).tokenize()?;
    let mut p = Parser::new(toks);
    p.program()
}

/// Parse an annotation string. Returns the signature and the label, if one
/// trailed the result type inside the string.
pub fn parse_signature(sig: &str) -> Result<(MethodSignature, Option<Label>), ParseError> {
    parse_signature_at(sig, 0)
}

pub fn parse_signature_at(
    sig: &str,
    offset: usize,
) -> Result<(MethodSignature, Option<Label>), ParseError> {
    let toks = Lexer::new(sig, offset).tokenize()?;
    let mut p = Parser::new(toks);
    let out = p.signature()?;
    p.expect_eof()?;
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    locals: HashSet<String>,
}

impl Parser {
    fn new(toks: Vec<Lexed>) -> Self {
        Parser {
            toks,
            pos: 0,
            locals: HashSet::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos.min(self.toks.len() - 1)].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1).min(self.toks.len() - 1)].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].tok.clone();
        if self.pos < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax(SyntaxError {
            span: self.span(),
            message: format!("{}, found {}", msg.into(), self.peek().describe()),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(format!("expected {}", what)))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        self.skip_seps();
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            Err(self.err("expected end of input"))
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Tok::Newline) {
            self.bump();
        }
    }

    fn skip_seps(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    // ---- programs and declarations ----

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        let mut main_members = Vec::new();
        let mut pending: Option<PendingType> = None;
        self.skip_seps();
        while !matches!(self.peek(), Tok::Eof) {
            match self.peek() {
                Tok::Class => {
                    self.flush_pending(&pending)?;
                    decls.push(self.class_decl()?);
                }
                Tok::Module => {
                    self.flush_pending(&pending)?;
                    decls.push(self.module_decl()?);
                }
                _ => {
                    if let Some(d) = self.member_decl(&mut pending)? {
                        main_members.push(d);
                    }
                }
            }
            self.skip_seps();
        }
        self.flush_pending(&pending)?;
        if !main_members.is_empty() {
            let span = main_members[0].span;
            decls.push(Decl {
                kind: DeclKind::Class {
                    name: "Main".to_string(),
                    super_name: None,
                    members: main_members,
                },
                span,
            });
        }
        let prog = Program { decls };
        validate_program(&prog)?;
        Ok(prog)
    }

    fn flush_pending(&self, pending: &Option<PendingType>) -> Result<(), ParseError> {
        if let Some(p) = pending {
            return Err(ParseError::Syntax(SyntaxError {
                span: p.span,
                message: "`type` annotation without a method name must be followed by a `def`"
                    .into(),
            }));
        }
        Ok(())
    }

    fn class_decl(&mut self) -> Result<Decl, ParseError> {
        let start = self.span();
        self.bump(); // class
        let name = self.const_name()?;
        let super_name = if self.eat(&Tok::Op("<".into())) {
            Some(self.const_name()?)
        } else {
            None
        };
        let members = self.member_list()?;
        self.expect(&Tok::End, "`end` to close `class`")?;
        Ok(Decl {
            kind: DeclKind::Class {
                name,
                super_name,
                members,
            },
            span: start.join(self.prev_span()),
        })
    }

    fn module_decl(&mut self) -> Result<Decl, ParseError> {
        let start = self.span();
        self.bump(); // module
        let name = self.const_name()?;
        let members = self.member_list()?;
        self.expect(&Tok::End, "`end` to close `module`")?;
        Ok(Decl {
            kind: DeclKind::Module { name, members },
            span: start.join(self.prev_span()),
        })
    }

    fn member_list(&mut self) -> Result<Vec<Decl>, ParseError> {
        let mut members = Vec::new();
        let mut pending: Option<PendingType> = None;
        self.skip_seps();
        while !matches!(self.peek(), Tok::End | Tok::Eof) {
            if let Some(d) = self.member_decl(&mut pending)? {
                members.push(d);
            }
            self.skip_seps();
        }
        self.flush_pending(&pending)?;
        Ok(members)
    }

    /// One member declaration. Returns `None` when the member was an
    /// anonymous `type '...'` that attaches to the following `def`.
    fn member_decl(&mut self, pending: &mut Option<PendingType>) -> Result<Option<Decl>, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Include => {
                self.bump();
                let name = self.const_name()?;
                Ok(Some(Decl {
                    kind: DeclKind::Include(name),
                    span: start.join(self.prev_span()),
                }))
            }
            Tok::AttrAccessor => {
                self.bump();
                let mut fields = vec![self.plain_symbol()?];
                while self.eat(&Tok::Comma) {
                    fields.push(self.plain_symbol()?);
                }
                Ok(Some(Decl {
                    kind: DeclKind::AttrAccessor(fields),
                    span: start.join(self.prev_span()),
                }))
            }
            Tok::VarType => {
                self.bump();
                let mut fields = vec![self.field_symbol()?];
                while self.eat(&Tok::Comma) {
                    if matches!(self.peek(), Tok::Str(_)) {
                        break;
                    }
                    fields.push(self.field_symbol()?);
                }
                let base = match self.bump() {
                    Tok::Str(s) => parse_base_name(&s, self.prev_span())?,
                    _ => return Err(self.err("expected type string in `var_type`")),
                };
                Ok(Some(Decl {
                    kind: DeclKind::VarType { fields, base },
                    span: start.join(self.prev_span()),
                }))
            }
            Tok::Type => {
                self.bump();
                let name = if let Tok::Symbol(s) = self.peek() {
                    let s = s.clone();
                    self.bump();
                    self.expect(&Tok::Comma, "`,` after method name")?;
                    Some(s)
                } else {
                    None
                };
                let (sig, mut label, str_span) = match self.bump() {
                    Tok::Str(s) => {
                        let sp = self.prev_span();
                        let (sig, l) = parse_signature_at(&s, sp.start + 1)?;
                        (sig, l, sp)
                    }
                    _ => return Err(self.err("expected annotation string after `type`")),
                };
                let mut verify_label = None;
                while self.eat(&Tok::Comma) {
                    match self.bump() {
                        Tok::Symbol(s) if s == "pure" => label = Some(Label::Pure),
                        Tok::Symbol(s) if s == "exact" => label = Some(Label::Exact),
                        Tok::LabelKey(k) if k == "modifies" => {
                            label = Some(self.modifies_entries()?);
                        }
                        Tok::LabelKey(k) if k == "verify" => match self.bump() {
                            Tok::Symbol(s) => verify_label = Some(s),
                            _ => return Err(self.err("expected symbol after `verify:`")),
                        },
                        _ => return Err(self.err("expected label after `,` in `type`")),
                    }
                }
                match name {
                    Some(method) => Ok(Some(Decl {
                        kind: DeclKind::MethodAnnot {
                            method,
                            sig,
                            label,
                            verify_label,
                        },
                        span: start.join(self.prev_span()),
                    })),
                    None => {
                        self.flush_pending(pending)?;
                        *pending = Some(PendingType {
                            sig,
                            label,
                            verify_label,
                            span: str_span,
                        });
                        Ok(None)
                    }
                }
            }
            Tok::Def => {
                let p = pending.take();
                Ok(Some(self.method_def(p)?))
            }
            Tok::Ident(kind) if kind == "belongs_to" => {
                self.bump();
                let mut args = vec![self.plain_symbol()?];
                while self.eat(&Tok::Comma) {
                    args.push(self.plain_symbol()?);
                }
                Ok(Some(Decl {
                    kind: DeclKind::Generator { kind, args },
                    span: start.join(self.prev_span()),
                }))
            }
            _ => Err(self.err("expected a declaration")),
        }
    }

    fn modifies_entries(&mut self) -> Result<Label, ParseError> {
        self.expect(&Tok::LBrace, "`{` after `modifies:`")?;
        let mut entries = Vec::new();
        if !matches!(self.peek(), Tok::RBrace) {
            loop {
                let target = match self.bump() {
                    Tok::LabelKey(k) => k,
                    _ => return Err(self.err("expected `name:` in modifies list")),
                };
                let field = match self.bump() {
                    Tok::AtIdent(f) => f,
                    _ => return Err(self.err("expected `@field` in modifies list")),
                };
                entries.push((target, field));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RBrace, "`}` to close modifies list")?;
        Ok(Label::Modifies(entries))
    }

    fn method_def(&mut self, pending: Option<PendingType>) -> Result<Decl, ParseError> {
        let start = self.span();
        self.bump(); // def
        let singleton = if matches!(self.peek(), Tok::SelfKw) && matches!(self.peek_at(1), Tok::Dot)
        {
            self.bump();
            self.bump();
            true
        } else {
            false
        };
        let name = self.method_name()?;
        let mut params = Vec::new();
        if self.eat(&Tok::LParen) {
            if !matches!(self.peek(), Tok::RParen) {
                loop {
                    match self.bump() {
                        Tok::Ident(n) => params.push(n),
                        _ => return Err(self.err("expected parameter name")),
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            self.expect(&Tok::RParen, "`)` to close parameter list")?;
        }
        let saved = std::mem::take(&mut self.locals);
        self.locals = params.iter().cloned().collect();
        let body = self.stmt_seq(&[Tok::End])?;
        self.locals = saved;
        self.expect(&Tok::End, "`end` to close `def`")?;
        let (sig, label, verify_label) = match pending {
            Some(p) => (Some(p.sig), p.label.unwrap_or(Label::Exact), p.verify_label),
            None => (None, Label::Exact, None),
        };
        Ok(Decl {
            kind: DeclKind::MethodDef {
                name,
                singleton,
                params,
                sig,
                label,
                verify_label,
                body,
            },
            span: start.join(self.prev_span()),
        })
    }

    fn method_name(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Ident(n) => {
                // setter definition `def sec=(v)`
                if *self.peek() == Tok::Op("=".into()) && matches!(self.peek_at(1), Tok::LParen) {
                    self.bump();
                    Ok(format!("{}=", n))
                } else {
                    Ok(n)
                }
            }
            Tok::Op(op) => Ok(op),
            _ => Err(self.err("expected method name after `def`")),
        }
    }

    fn const_name(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Const(n) => Ok(n),
            _ => Err(self.err("expected a class or module name")),
        }
    }

    fn plain_symbol(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Symbol(s) if !s.starts_with('@') => Ok(s),
            _ => Err(self.err("expected a `:name` symbol")),
        }
    }

    fn field_symbol(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Symbol(s) if s.starts_with('@') => Ok(s[1..].to_string()),
            _ => Err(self.err("expected a `:@field` symbol")),
        }
    }

    // ---- statements and expressions ----

    /// A sequence of statements, stopping (without consuming) at any of
    /// `terminators`. An empty sequence is `nil`.
    fn stmt_seq(&mut self, terminators: &[Tok]) -> Result<Expr, ParseError> {
        self.skip_seps();
        let mut stmts = Vec::new();
        while !terminators.contains(self.peek()) && !matches!(self.peek(), Tok::Eof) {
            stmts.push(self.stmt()?);
            let had_sep = matches!(self.peek(), Tok::Newline | Tok::Semi);
            self.skip_seps();
            if !had_sep {
                break;
            }
        }
        let mut iter = stmts.into_iter().rev();
        let last = match iter.next() {
            Some(e) => e,
            None => Expr::new(ExprKind::Const(Const::Nil), self.span()),
        };
        Ok(iter.fold(last, |acc, e| {
            let span = e.span.join(acc.span);
            Expr::new(ExprKind::Seq(Box::new(e), Box::new(acc)), span)
        }))
    }

    fn stmt(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_assign()?;
        // trailing `if` / `unless` modifiers
        loop {
            if self.eat(&Tok::If) {
                let c = self.expr_assign()?;
                let span = e.span.join(c.span);
                e = Expr::new(
                    ExprKind::If(Box::new(c), Box::new(e), Box::new(Expr::nil())),
                    span,
                );
            } else if self.eat(&Tok::Unless) {
                let c = self.expr_assign()?;
                let span = e.span.join(c.span);
                e = Expr::new(
                    ExprKind::If(Box::new(c), Box::new(Expr::nil()), Box::new(e)),
                    span,
                );
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn expr_assign(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.expr_or()?;
        let op = match self.peek() {
            Tok::Op(o) if o == "=" => None,
            Tok::OpAssign(o) => Some(o.clone()),
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.expr_assign()?;
        let span = lhs.span.join(rhs.span);
        let rhs = match op {
            None => rhs,
            Some(o) => {
                // `lhs op= rhs` => `lhs = lhs.op(rhs)`; for index targets the
                // read form is reconstructed from the desugared `get`.
                let read = lhs.clone();
                Expr::new(
                    ExprKind::Call {
                        recv: Box::new(read),
                        method: o,
                        args: vec![rhs],
                        implicit_self: false,
                    },
                    span,
                )
            }
        };
        self.assign_target(lhs, rhs, span)
    }

    fn assign_target(&mut self, lhs: Expr, rhs: Expr, span: Span) -> Result<Expr, ParseError> {
        match lhs.kind {
            ExprKind::Var(name) => {
                self.locals.insert(name.clone());
                Ok(Expr::new(ExprKind::Assign(name, Box::new(rhs)), span))
            }
            // A bare identifier that looked like an implicit-self call turns
            // out to be a fresh local when assigned to.
            ExprKind::Call {
                method,
                args,
                implicit_self: true,
                ..
            } if args.is_empty() => {
                self.locals.insert(method.clone());
                Ok(Expr::new(ExprKind::Assign(method, Box::new(rhs)), span))
            }
            ExprKind::FieldRead(f) => Ok(Expr::new(ExprKind::FieldAssign(f, Box::new(rhs)), span)),
            // `e.m = v` is the setter call `e.m=(v)`
            ExprKind::Call {
                recv,
                method,
                args,
                implicit_self: false,
            } if args.is_empty() && method != "get" => Ok(Expr::new(
                ExprKind::Call {
                    recv,
                    method: format!("{}=", method),
                    args: vec![rhs],
                    implicit_self: false,
                },
                span,
            )),
            // `a[i] = v` is `a.set(i, v)`
            ExprKind::Call {
                recv,
                method,
                mut args,
                implicit_self: false,
            } if method == "get" && args.len() == 1 => {
                args.push(rhs);
                Ok(Expr::new(
                    ExprKind::Call {
                        recv,
                        method: "set".to_string(),
                        args,
                        implicit_self: false,
                    },
                    span,
                ))
            }
            _ => Err(ParseError::Syntax(SyntaxError {
                span: lhs.span,
                message: "invalid assignment target".into(),
            })),
        }
    }

    fn expr_or(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_and()?;
        while *self.peek() == Tok::Op("||".into()) {
            self.bump();
            let rhs = self.expr_and()?;
            let span = e.span.join(rhs.span);
            e = Expr::new(
                ExprKind::If(
                    Box::new(e),
                    Box::new(Expr::synthetic(ExprKind::Const(Const::True))),
                    Box::new(rhs),
                ),
                span,
            );
        }
        Ok(e)
    }

    fn expr_and(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_eq()?;
        while *self.peek() == Tok::Op("&&".into()) {
            self.bump();
            let rhs = self.expr_eq()?;
            let span = e.span.join(rhs.span);
            e = Expr::new(
                ExprKind::If(
                    Box::new(e),
                    Box::new(rhs),
                    Box::new(Expr::synthetic(ExprKind::Const(Const::False))),
                ),
                span,
            );
        }
        Ok(e)
    }

    fn expr_eq(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_rel()?;
        loop {
            let op = match self.peek() {
                Tok::Op(o) if o == "==" || o == "!=" => o.clone(),
                _ => break,
            };
            self.bump();
            let rhs = self.expr_rel()?;
            let span = e.span.join(rhs.span);
            e = Expr::new(
                ExprKind::Call {
                    recv: Box::new(e),
                    method: op,
                    args: vec![rhs],
                    implicit_self: false,
                },
                span,
            );
        }
        Ok(e)
    }

    /// Relational operators, with Ruby-unlike chaining: `a <= b < c`
    /// desugars to `a <= b && b < c`.
    fn expr_rel(&mut self) -> Result<Expr, ParseError> {
        let first = self.expr_shift()?;
        let mut operands = vec![first];
        let mut ops = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op(o) if matches!(o.as_str(), "<" | "<=" | ">" | ">=") => o.clone(),
                _ => break,
            };
            self.bump();
            ops.push(op);
            operands.push(self.expr_shift()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().unwrap());
        }
        let mut comparisons = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            let lhs = operands[i].clone();
            let rhs = operands[i + 1].clone();
            let span = lhs.span.join(rhs.span);
            comparisons.push(Expr::new(
                ExprKind::Call {
                    recv: Box::new(lhs),
                    method: op.clone(),
                    args: vec![rhs],
                    implicit_self: false,
                },
                span,
            ));
        }
        let mut iter = comparisons.into_iter().rev();
        let last = iter.next().unwrap();
        Ok(iter.fold(last, |acc, c| {
            let span = c.span.join(acc.span);
            Expr::new(
                ExprKind::If(
                    Box::new(c),
                    Box::new(acc),
                    Box::new(Expr::synthetic(ExprKind::Const(Const::False))),
                ),
                span,
            )
        }))
    }

    fn expr_shift(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_add()?;
        while *self.peek() == Tok::Op("<<".into()) {
            self.bump();
            let rhs = self.expr_add()?;
            let span = e.span.join(rhs.span);
            e = Expr::new(
                ExprKind::Call {
                    recv: Box::new(e),
                    method: "<<".to_string(),
                    args: vec![rhs],
                    implicit_self: false,
                },
                span,
            );
        }
        Ok(e)
    }

    fn expr_add(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Op(o) if o == "+" || o == "-" => o.clone(),
                _ => break,
            };
            self.bump();
            let rhs = self.expr_mul()?;
            let span = e.span.join(rhs.span);
            e = Expr::new(
                ExprKind::Call {
                    recv: Box::new(e),
                    method: op,
                    args: vec![rhs],
                    implicit_self: false,
                },
                span,
            );
        }
        Ok(e)
    }

    fn expr_mul(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op(o) if o == "*" || o == "/" => o.clone(),
                _ => break,
            };
            self.bump();
            let rhs = self.expr_unary()?;
            let span = e.span.join(rhs.span);
            e = Expr::new(
                ExprKind::Call {
                    recv: Box::new(e),
                    method: op,
                    args: vec![rhs],
                    implicit_self: false,
                },
                span,
            );
        }
        Ok(e)
    }

    fn expr_unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span();
        match self.peek() {
            Tok::Op(o) if o == "!" => {
                self.bump();
                let e = self.expr_unary()?;
                let span = start.join(e.span);
                Ok(Expr::new(
                    ExprKind::If(
                        Box::new(e),
                        Box::new(Expr::synthetic(ExprKind::Const(Const::False))),
                        Box::new(Expr::synthetic(ExprKind::Const(Const::True))),
                    ),
                    span,
                ))
            }
            Tok::Op(o) if o == "-" => {
                self.bump();
                // Negative literals fold; anything else is unary minus.
                match self.peek().clone() {
                    Tok::Int(n) => {
                        self.bump();
                        let v: BigInt = n.parse().unwrap();
                        Ok(Expr::new(
                            ExprKind::Const(Const::Int(-v)),
                            start.join(self.prev_span()),
                        ))
                    }
                    Tok::Float(n) => {
                        self.bump();
                        Ok(Expr::new(
                            ExprKind::Const(Const::Float(format!("-{}", n))),
                            start.join(self.prev_span()),
                        ))
                    }
                    _ => {
                        let e = self.expr_unary()?;
                        let span = start.join(e.span);
                        // Fold through parens too, so `-(5)` equals `-5`.
                        let kind = match e.kind {
                            ExprKind::Const(Const::Int(v)) => ExprKind::Const(Const::Int(-v)),
                            ExprKind::Const(Const::Float(f)) => match f.strip_prefix('-') {
                                Some(pos) => ExprKind::Const(Const::Float(pos.to_string())),
                                None => ExprKind::Const(Const::Float(format!("-{}", f))),
                            },
                            other => ExprKind::Call {
                                recv: Box::new(Expr::new(other, e.span)),
                                method: "-@".to_string(),
                                args: vec![],
                                implicit_self: false,
                            },
                        };
                        Ok(Expr::new(kind, span))
                    }
                }
            }
            _ => self.expr_postfix(),
        }
    }

    fn expr_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.expr_primary()?;
        loop {
            if self.eat(&Tok::Dot) {
                let method = match self.bump() {
                    Tok::Ident(n) => n,
                    _ => return Err(self.err("expected method name after `.`")),
                };
                let args = if matches!(self.peek(), Tok::LParen) {
                    self.call_args()?
                } else {
                    vec![]
                };
                let span = e.span.join(self.prev_span());
                e = Expr::new(
                    ExprKind::Call {
                        recv: Box::new(e),
                        method,
                        args,
                        implicit_self: false,
                    },
                    span,
                );
            } else if matches!(self.peek(), Tok::LBracket) {
                self.bump();
                let idx = self.expr_assign()?;
                self.expect(&Tok::RBracket, "`]` to close index")?;
                let span = e.span.join(self.prev_span());
                e = Expr::new(
                    ExprKind::Call {
                        recv: Box::new(e),
                        method: "get".to_string(),
                        args: vec![idx],
                        implicit_self: false,
                    },
                    span,
                );
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        self.skip_newlines();
        if !matches!(self.peek(), Tok::RParen) {
            loop {
                args.push(self.expr_assign()?);
                self.skip_newlines();
                if !self.eat(&Tok::Comma) {
                    break;
                }
                self.skip_newlines();
            }
        }
        self.expect(&Tok::RParen, "`)` to close arguments")?;
        Ok(args)
    }

    fn expr_primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::new(
                    ExprKind::Const(Const::Int(n.parse().unwrap())),
                    start,
                ))
            }
            Tok::Float(n) => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(Const::Float(n)), start))
            }
            Tok::Nil => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(Const::Nil), start))
            }
            Tok::True => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(Const::True), start))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::new(ExprKind::Const(Const::False), start))
            }
            Tok::SelfKw => {
                self.bump();
                Ok(Expr::new(ExprKind::SelfRef, start))
            }
            Tok::AtIdent(f) => {
                self.bump();
                Ok(Expr::new(ExprKind::FieldRead(f), start))
            }
            Tok::LParen => {
                self.bump();
                let e = self.stmt_seq(&[Tok::RParen])?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                self.skip_newlines();
                if !matches!(self.peek(), Tok::RBracket) {
                    loop {
                        items.push(self.expr_assign()?);
                        self.skip_newlines();
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                        self.skip_newlines();
                    }
                }
                self.expect(&Tok::RBracket, "`]` to close array literal")?;
                Ok(Expr::new(
                    ExprKind::ArrayLit(items),
                    start.join(self.prev_span()),
                ))
            }
            Tok::If => self.if_expr(false),
            Tok::Unless => self.if_expr(true),
            Tok::Return => {
                self.bump();
                let inner = if matches!(
                    self.peek(),
                    Tok::Newline | Tok::Semi | Tok::End | Tok::RParen | Tok::Eof | Tok::If | Tok::Unless
                ) {
                    Expr::new(ExprKind::Const(Const::Nil), start)
                } else {
                    self.expr_assign()?
                };
                let span = start.join(inner.span);
                Ok(Expr::new(ExprKind::Return(Box::new(inner)), span))
            }
            Tok::Raise => {
                self.bump();
                let msg = match self.bump() {
                    Tok::Str(s) => s,
                    _ => return Err(self.err("expected string message after `raise`")),
                };
                Ok(Expr::new(ExprKind::Raise(msg), start.join(self.prev_span())))
            }
            Tok::Ident(name) => {
                self.bump();
                if matches!(self.peek(), Tok::LParen) {
                    let args = self.call_args()?;
                    let span = start.join(self.prev_span());
                    Ok(Expr::new(
                        ExprKind::Call {
                            recv: Box::new(Expr::new(ExprKind::SelfRef, start)),
                            method: name,
                            args,
                            implicit_self: true,
                        },
                        span,
                    ))
                } else if self.locals.contains(&name) {
                    Ok(Expr::new(ExprKind::Var(name), start))
                } else {
                    Ok(Expr::new(
                        ExprKind::Call {
                            recv: Box::new(Expr::new(ExprKind::SelfRef, start)),
                            method: name,
                            args: vec![],
                            implicit_self: true,
                        },
                        start,
                    ))
                }
            }
            Tok::Const(name) => {
                self.bump();
                self.expect(&Tok::Dot, "`.new` after class name")?;
                match self.bump() {
                    Tok::Ident(m) if m == "new" => Ok(Expr::new(
                        ExprKind::New(name),
                        start.join(self.prev_span()),
                    )),
                    _ => Err(self.err("only `.new` is supported on a class name receiver")),
                }
            }
            _ => Err(self.err("expected an expression")),
        }
    }

    fn if_expr(&mut self, negated: bool) -> Result<Expr, ParseError> {
        let start = self.span();
        self.bump(); // if / unless
        let cond = self.expr_assign()?;
        self.eat(&Tok::Then);
        let then_branch = self.stmt_seq(&[Tok::End, Tok::Else, Tok::Elsif])?;
        // `elsif` rewrites into a nested `if` that consumes the shared `end`.
        let mut end_consumed = false;
        let else_branch = if self.eat(&Tok::Else) {
            self.stmt_seq(&[Tok::End])?
        } else if matches!(self.peek(), Tok::Elsif) {
            self.toks[self.pos].tok = Tok::If;
            end_consumed = true;
            self.if_expr(false)?
        } else {
            Expr::new(ExprKind::Const(Const::Nil), self.span())
        };
        if !end_consumed {
            self.expect(&Tok::End, "`end` to close `if`")?;
        }
        let span = start.join(self.prev_span());
        let (t, e) = if negated {
            (else_branch, then_branch)
        } else {
            (then_branch, else_branch)
        };
        Ok(Expr::new(
            ExprKind::If(Box::new(cond), Box::new(t), Box::new(e)),
            span,
        ))
    }

    // ---- signatures ----

    /// `(Base name {pred}, ...) -> Base name {pred} [, label]`
    fn signature(&mut self) -> Result<(MethodSignature, Option<Label>), ParseError> {
        self.expect(&Tok::LParen, "`(` to open a signature")?;
        // First pass: capture parameter structure with predicate token
        // ranges, so every binder is in scope in every predicate.
        struct RawParam {
            base: BaseName,
            binder: Option<String>,
            pred: Option<(usize, usize)>,
        }
        let mut raw = Vec::new();
        if !matches!(self.peek(), Tok::RParen) {
            loop {
                let base = self.base_name()?;
                let binder = if let Tok::Ident(b) = self.peek() {
                    let b = b.clone();
                    self.bump();
                    Some(b)
                } else {
                    None
                };
                let pred = if matches!(self.peek(), Tok::LBrace) {
                    Some(self.capture_braced()?)
                } else {
                    None
                };
                raw.push(RawParam { base, binder, pred });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "`)` to close parameters")?;
        self.expect(&Tok::Arrow, "`->` before the result type")?;
        let res_base = self.base_name()?;
        let res_binder = if let Tok::Ident(b) = self.peek() {
            let b = b.clone();
            self.bump();
            Some(b)
        } else {
            None
        };
        let res_pred = if matches!(self.peek(), Tok::LBrace) {
            Some(self.capture_braced()?)
        } else {
            None
        };
        // Optional trailing label inside the annotation string.
        let mut label = None;
        if self.eat(&Tok::Comma) {
            match self.bump() {
                Tok::Symbol(s) if s == "pure" => label = Some(Label::Pure),
                Tok::Symbol(s) if s == "exact" => label = Some(Label::Exact),
                Tok::LabelKey(k) if k == "modifies" => label = Some(self.modifies_entries()?),
                _ => return Err(self.err("expected a label after `,`")),
            }
        }

        let binders: Vec<String> = raw
            .iter()
            .enumerate()
            .map(|(i, p)| p.binder.clone().unwrap_or_else(|| format!("_p{}", i + 1)))
            .collect();
        for (i, a) in binders.iter().enumerate() {
            for b in binders.iter().skip(i + 1) {
                if a == b {
                    return Err(ParseError::Syntax(SyntaxError {
                        span: self.prev_span(),
                        message: format!("duplicate parameter binder `{}`", a),
                    }));
                }
            }
        }
        let param_scope: HashSet<String> = binders.iter().cloned().collect();
        let mut params = Vec::new();
        for (i, p) in raw.iter().enumerate() {
            let predicate = match p.pred {
                Some((lo, hi)) => self.parse_range(lo, hi, &param_scope)?,
                None => Expr::true_(),
            };
            check_predicate_purity(&predicate)?;
            params.push(RefinedType {
                binder: binders[i].clone(),
                base: p.base.clone(),
                predicate,
            });
        }
        let res_binder = res_binder.unwrap_or_else(|| "_ret".to_string());
        let mut res_scope = param_scope;
        res_scope.insert(res_binder.clone());
        let predicate = match res_pred {
            Some((lo, hi)) => self.parse_range(lo, hi, &res_scope)?,
            None => Expr::true_(),
        };
        check_predicate_purity(&predicate)?;
        let sig = MethodSignature {
            params,
            result: RefinedType {
                binder: res_binder,
                base: res_base,
                predicate,
            },
        };
        Ok((sig, label))
    }

    /// Consume a `{ ... }` group, returning the token range of its interior.
    fn capture_braced(&mut self) -> Result<(usize, usize), ParseError> {
        self.expect(&Tok::LBrace, "`{`")?;
        let lo = self.pos;
        let mut depth = 1usize;
        loop {
            match self.peek() {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                Tok::Eof => {
                    return Err(ParseError::Syntax(SyntaxError {
                        span: self.toks[lo.saturating_sub(1)].span,
                        message: "unclosed `{` in refinement".into(),
                    }))
                }
                _ => {}
            }
            self.bump();
        }
        let hi = self.pos;
        self.bump(); // closing brace
        Ok((lo, hi))
    }

    /// Parse a previously captured token range as an expression with the
    /// given locals in scope.
    fn parse_range(
        &mut self,
        lo: usize,
        hi: usize,
        scope: &HashSet<String>,
    ) -> Result<Expr, ParseError> {
        let mut toks: Vec<Lexed> = self.toks[lo..hi].to_vec();
        let end_span = if hi > lo {
            self.toks[hi - 1].span
        } else {
            self.toks[lo].span
        };
        toks.push(Lexed {
            tok: Tok::Eof,
            span: end_span,
        });
        let mut sub = Parser::new(toks);
        sub.locals = scope.clone();
        let e = sub.stmt()?;
        sub.expect_eof()?;
        Ok(e)
    }

    fn base_name(&mut self) -> Result<BaseName, ParseError> {
        let mut members = vec![self.base_name_atom()?];
        while self.eat(&Tok::Or) {
            members.push(self.base_name_atom()?);
        }
        if members.len() == 1 {
            Ok(members.pop().unwrap())
        } else {
            Ok(BaseName::Union(members))
        }
    }

    fn base_name_atom(&mut self) -> Result<BaseName, ParseError> {
        match self.bump() {
            Tok::Nil => Ok(BaseName::Nil),
            Tok::Ident(n) if n == "bool" => Ok(BaseName::class("Bool")),
            Tok::Const(n) if n == "Array" => {
                self.expect(&Tok::Op("<".into()), "`<` after `Array`")?;
                let elem = self.base_name()?;
                self.expect(&Tok::Op(">".into()), "`>` to close `Array<...>`")?;
                Ok(BaseName::Array(Box::new(elem)))
            }
            Tok::Const(n) => Ok(BaseName::Class(n)),
            _ => Err(self.err("expected a base type name")),
        }
    }
}

struct PendingType {
    sig: MethodSignature,
    label: Option<Label>,
    verify_label: Option<String>,
    span: Span,
}

/// Parse a base-type string from `var_type` (no refinement allowed there).
pub fn parse_base_name(text: &str, span: Span) -> Result<BaseName, ParseError> {
    let toks = Lexer::new(text, span.start + 1).tokenize()?;
    let mut p = Parser::new(toks);
    let b = p.base_name()?;
    p.expect_eof()?;
    Ok(b)
}

/// Structural purity: refinements may not assign, write fields, allocate,
/// or raise. (Whether called methods are pure is checked against the class
/// table later.)
pub fn check_predicate_purity(e: &Expr) -> Result<(), ParseError> {
    let mut bad: Option<(Span, &'static str)> = None;
    walk_expr(e, &mut |n| {
        if bad.is_some() {
            return;
        }
        match &n.kind {
            ExprKind::Assign(..) => bad = Some((n.span, "assignment")),
            ExprKind::FieldAssign(..) => bad = Some((n.span, "field write")),
            ExprKind::New(_) => bad = Some((n.span, "object allocation")),
            ExprKind::Raise(_) => bad = Some((n.span, "raise")),
            ExprKind::Return(_) => bad = Some((n.span, "return")),
            _ => {}
        }
    });
    match bad {
        Some((span, what)) => Err(ParseError::Purity {
            span,
            message: format!("refinement predicates must be pure: {} is not allowed", what),
        }),
        None => Ok(()),
    }
}

fn validate_program(p: &Program) -> Result<(), ParseError> {
    let mut owners = HashSet::new();
    for d in &p.decls {
        let (name, members) = match &d.kind {
            DeclKind::Class { name, members, .. } => (name, members),
            DeclKind::Module { name, members } => (name, members),
            _ => continue,
        };
        if !owners.insert(name.clone()) {
            return Err(ParseError::DuplicateDefinition {
                owner: name.clone(),
                method: String::new(),
                span: d.span,
            });
        }
        let mut seen = HashSet::new();
        for m in members {
            let method = match &m.kind {
                DeclKind::MethodAnnot { method, .. } => method.clone(),
                DeclKind::MethodDef {
                    name,
                    sig: Some(_),
                    singleton,
                    ..
                } => format!("{}{}", if *singleton { "self." } else { "" }, name),
                _ => continue,
            };
            if !seen.insert(method.clone()) {
                return Err(ParseError::DuplicateDefinition {
                    owner: name.clone(),
                    method,
                    span: m.span,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::printer::pretty_print;

    fn parse_ok(src: &str) -> Program {
        match parse_program(src) {
            Ok(p) => p,
            Err(e) => panic!("parse failed: {} (span {:?})", e, e.span()),
        }
    }

    fn roundtrip(src: &str) {
        let p1 = parse_ok(src);
        let printed = pretty_print(&p1);
        let p2 = match parse_program(&printed) {
            Ok(p) => p,
            Err(e) => panic!("reparse failed: {}\nprinted:\n{}", e, printed),
        };
        assert_eq!(p1, p2, "round trip mismatch\nprinted:\n{}", printed);
    }

    #[test]
    fn incr_sec_toplevel_goes_to_main() {
        let p = parse_ok(
            "type '(Integer x { 0 <= x && x < 60 }) -> Integer r { 0 <= r && r < 60 }'\n\
             def incr_sec(x)\n  if (x == 59) then 0 else x + 1 end\nend\n",
        );
        assert_eq!(p.decls.len(), 1);
        let DeclKind::Class { name, members, .. } = &p.decls[0].kind else {
            panic!("expected class")
        };
        assert_eq!(name, "Main");
        assert_eq!(members.len(), 1);
        let DeclKind::MethodDef { name, sig, params, .. } = &members[0].kind else {
            panic!("expected def")
        };
        assert_eq!(name, "incr_sec");
        assert_eq!(params, &vec!["x".to_string()]);
        let sig = sig.as_ref().unwrap();
        assert_eq!(sig.params.len(), 1);
        assert_eq!(sig.params[0].binder, "x");
        assert_eq!(sig.params[0].base, BaseName::class("Integer"));
        assert!(!sig.params[0].is_trivial());
        assert_eq!(sig.result.binder, "r");
    }

    #[test]
    fn chained_comparison_desugars_to_conjunction() {
        let p = parse_ok("def m(x)\n  0 <= x && x < 60\nend\n");
        let q = parse_ok("def m(x)\n  0 <= x < 60\nend\n");
        assert_eq!(p, q);
    }

    #[test]
    fn and_or_not_desugar_to_if() {
        let p = parse_ok("def m(a, b)\n  a && b\nend\n");
        let q = parse_ok("def m(a, b)\n  if a then b else false end\nend\n");
        assert_eq!(p, q);
        let p = parse_ok("def m(a, b)\n  a || b\nend\n");
        let q = parse_ok("def m(a, b)\n  if a then true else b end\nend\n");
        assert_eq!(p, q);
        let p = parse_ok("def m(a)\n  !a\nend\n");
        let q = parse_ok("def m(a)\n  if a then false else true end\nend\n");
        assert_eq!(p, q);
    }

    #[test]
    fn trailing_modifiers() {
        let p = parse_ok("def m(a)\n  return 1 if a\n  2\nend\n");
        let q = parse_ok("def m(a)\n  if a then return 1 end\n  2\nend\n");
        assert_eq!(p, q);
        let p = parse_ok("def m(a)\n  raise 'x' unless a\n  2\nend\n");
        let q = parse_ok("def m(a)\n  if a then nil else raise 'x' end\n  2\nend\n");
        assert_eq!(p, q);
    }

    #[test]
    fn op_assign_desugars() {
        let p = parse_ok("def m(t)\n  x = 1\n  x += 2\nend\n");
        let q = parse_ok("def m(t)\n  x = 1\n  x = x + 2\nend\n");
        assert_eq!(p, q);
        let p = parse_ok("class C\nvar_type :@min, 'Integer'\ndef m\n  @min -= 1\nend\nend\n");
        let q = parse_ok("class C\nvar_type :@min, 'Integer'\ndef m\n  @min = @min - 1\nend\nend\n");
        assert_eq!(p, q);
    }

    #[test]
    fn index_sugar() {
        let p = parse_ok("def m(a)\n  a[3]\nend\n");
        let q = parse_ok("def m(a)\n  a.get(3)\nend\n");
        assert_eq!(p, q);
        let p = parse_ok("def m(a)\n  a[3] = 5\nend\n");
        let q = parse_ok("def m(a)\n  a.set(3, 5)\nend\n");
        assert_eq!(p, q);
    }

    #[test]
    fn setter_call_and_local_assignment_disambiguate() {
        // `folder = x` with no local: new local. `self.folder = x`: setter.
        let p = parse_ok("def m(x)\n  self.folder = x\nend\n");
        let DeclKind::Class { members, .. } = &p.decls[0].kind else { panic!() };
        let DeclKind::MethodDef { body, .. } = &members[0].kind else { panic!() };
        let ExprKind::Call { method, args, .. } = &body.kind else {
            panic!("expected setter call, got {:?}", body.kind)
        };
        assert_eq!(method, "folder=");
        assert_eq!(args.len(), 1);
    }

    #[test]
    fn bare_name_is_call_unless_local() {
        let p = parse_ok("def m(x)\n  y = sec\n  x\nend\n");
        let DeclKind::Class { members, .. } = &p.decls[0].kind else { panic!() };
        let DeclKind::MethodDef { body, .. } = &members[0].kind else { panic!() };
        let ExprKind::Seq(first, second) = &body.kind else { panic!() };
        let ExprKind::Assign(_, rhs) = &first.kind else { panic!() };
        assert!(matches!(
            &rhs.kind,
            ExprKind::Call { implicit_self: true, method, .. } if method == "sec"
        ));
        assert!(matches!(&second.kind, ExprKind::Var(v) if v == "x"));
    }

    #[test]
    fn class_with_annotations() {
        let p = parse_ok(
            "class Time\n\
             attr_accessor :sec, :min, :hour\n\
             var_type :@sec, :@min, :@hour, 'Integer'\n\
             def is_valid\n  0 <= @sec < 60 && 0 <= @min < 60 && 0 <= @hour < 24\nend\n\
             end\n",
        );
        let DeclKind::Class { name, members, .. } = &p.decls[0].kind else { panic!() };
        assert_eq!(name, "Time");
        assert_eq!(members.len(), 3);
        assert!(matches!(&members[0].kind, DeclKind::AttrAccessor(fs) if fs.len() == 3));
        assert!(matches!(&members[1].kind, DeclKind::VarType { fields, .. } if fields.len() == 3));
    }

    #[test]
    fn named_type_annotation_with_labels() {
        let p = parse_ok(
            "class A\n\
             type :value, '() -> Float v { 0 < v }', :pure\n\
             type :incr, '(Integer t) -> Integer r', modifies: {t: @min, self: @sec}\n\
             type :bump, '(Integer i) -> Integer o', :pure, verify: :bind\n\
             end\n",
        );
        let DeclKind::Class { members, .. } = &p.decls[0].kind else { panic!() };
        let DeclKind::MethodAnnot { method, label, .. } = &members[0].kind else { panic!() };
        assert_eq!(method, "value");
        assert_eq!(label, &Some(Label::Pure));
        let DeclKind::MethodAnnot { label, .. } = &members[1].kind else { panic!() };
        assert_eq!(
            label,
            &Some(Label::Modifies(vec![
                ("t".to_string(), "min".to_string()),
                ("self".to_string(), "sec".to_string()),
            ]))
        );
        let DeclKind::MethodAnnot { label, verify_label, .. } = &members[2].kind else { panic!() };
        assert_eq!(label, &Some(Label::Pure));
        assert_eq!(verify_label.as_deref(), Some("bind"));
    }

    #[test]
    fn label_inside_annotation_string() {
        let (sig, label) = parse_signature("(Integer x) -> Float r { r == x / value }").unwrap();
        assert_eq!(sig.params.len(), 1);
        assert!(label.is_none());
        let (_, label) = parse_signature("() -> Float v { 0 < v }, :pure").unwrap();
        assert_eq!(label, Some(Label::Pure));
    }

    #[test]
    fn signature_binders_scope_across_predicates() {
        // A later binder may appear in an earlier predicate and vice versa.
        let (sig, _) =
            parse_signature("(Integer a { a < b }, Integer b { a < b }) -> Integer r { r == a + b }")
                .unwrap();
        assert_eq!(sig.params.len(), 2);
        assert!(matches!(
            &sig.params[0].predicate.kind,
            ExprKind::Call { method, .. } if method == "<"
        ));
    }

    #[test]
    fn union_and_array_types() {
        let (sig, _) = parse_signature("(Integer or Float x, Array<Integer> a) -> bool b").unwrap();
        assert_eq!(
            sig.params[0].base,
            BaseName::Union(vec![BaseName::class("Integer"), BaseName::class("Float")])
        );
        assert_eq!(
            sig.params[1].base,
            BaseName::Array(Box::new(BaseName::class("Integer")))
        );
        assert_eq!(sig.result.base, BaseName::class("Bool"));
    }

    #[test]
    fn refinement_predicates_must_be_pure() {
        assert!(parse_signature("(Integer x { x = 3 }) -> Integer r").is_err());
        assert!(parse_signature("(Integer x) -> Integer r { @f = 1 }").is_err());
        assert!(parse_program(
            "type '(Integer x { raise \"no\" }) -> Integer r'\ndef m(x)\n  x\nend\n"
        )
        .is_err());
    }

    #[test]
    fn duplicate_method_annotations_rejected() {
        let r = parse_program(
            "class A\ntype :m, '() -> Integer r', :pure\ntype :m, '() -> Integer r', :pure\nend\n",
        );
        assert!(matches!(r, Err(ParseError::DuplicateDefinition { .. })));
    }

    #[test]
    fn elsif_chains() {
        let p = parse_ok("def m(x)\n  if x == 1 then 1 elsif x == 2 then 2 else 3 end\nend\n");
        let q = parse_ok("def m(x)\n  if x == 1 then 1 else if x == 2 then 2 else 3 end end\nend\n");
        assert_eq!(p, q);
    }

    #[test]
    fn operator_method_definitions() {
        let p = parse_ok("class A\ndef <<(data)\n  data\nend\nend\n");
        let DeclKind::Class { members, .. } = &p.decls[0].kind else { panic!() };
        assert!(matches!(&members[0].kind, DeclKind::MethodDef { name, .. } if name == "<<"));
    }

    #[test]
    fn singleton_defs() {
        let p = parse_ok("class Bank\ndef self.transaction(c1, c2, amount)\n  nil\nend\nend\n");
        let DeclKind::Class { members, .. } = &p.decls[0].kind else { panic!() };
        assert!(matches!(
            &members[0].kind,
            DeclKind::MethodDef { singleton: true, name, .. } if name == "transaction"
        ));
    }

    #[test]
    fn roundtrip_paper_shapes() {
        roundtrip(
            "class Time\n\
             attr_accessor :sec, :min, :hour\n\
             var_type :@sec, :@min, :@hour, 'Integer'\n\
             type '() -> bool b'\n\
             def is_valid\n  0 <= @sec < 60 && 0 <= @min < 60 && 0 <= @hour < 24\nend\n\
             type '(Time t1 { t1.is_valid }, Time t2 { t2.is_valid }, Time t3 { t3.is_valid }) -> Time r { r.is_valid }'\n\
             def mix(t1, t2, t3)\n  @sec = t1.sec\n  @min = t2.min\n  @hour = t3.hour\n  self\nend\n\
             end\n",
        );
        roundtrip(
            "class Money\n\
             var_type :@val, 'Float'\n\
             def value\n  if (@val > 0) then (return @val) else (return 0.01) end\nend\n\
             end\n",
        );
        roundtrip(
            "def incr_min(t)\n  if t.sec < 59 then t.sec = incr_sec(t.sec) else (t.min += 1\n t.sec = 0) end\n  return t\nend\n",
        );
        roundtrip("def m(a)\n  x = [1, 2, 3]\n  x << 4\n  x[0] = x[1]\n  x.include?(2)\nend\n");
        roundtrip("def m\n  raise 'Insufficient funds.' if 3 > 2\n  true\nend\n");
        roundtrip("module Comparable\ntype :cmp, '(Integer other) -> Integer r', :pure\nend\nclass A\ninclude Comparable\nend\n");
        roundtrip("class F\nbelongs_to :folder\nend\n");
        roundtrip("def m(x)\n  y = -x\n  z = -3\n  w = -2.5\n  y * z / w - x + 1\nend\n");
    }

    #[test]
    fn negative_literals_fold() {
        let p = parse_ok("def m\n  -3\nend\n");
        let DeclKind::Class { members, .. } = &p.decls[0].kind else { panic!() };
        let DeclKind::MethodDef { body, .. } = &members[0].kind else { panic!() };
        assert!(matches!(
            &body.kind,
            ExprKind::Const(Const::Int(n)) if *n == BigInt::from(-3)
        ));
    }

    #[test]
    fn spans_point_into_annotation_strings() {
        // The predicate `@bad = 1` sits inside the annotation string; its
        // error span must map into the original source text.
        let src = "type '(Integer x) -> Integer r { @bad = 1 }'\ndef m(x)\n  x\nend\n";
        let err = parse_program(src).unwrap_err();
        let span = err.span();
        assert!(src[span.start..].starts_with("@bad"), "span {:?} points at `{}`", span, &src[span.start..span.end.min(src.len())]);
    }
}
