//! Recursive-descent parser for device models.
//!
//! Operator precedence, loosest first: comparisons (non-associative),
//! `|`, `^`, `&`, shifts, `+ -`, `*`, unary `~ ! -`.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::term::WIDTHS;

const KEYWORDS: [&str; 17] = [
    "model",
    "state",
    "reg",
    "handler",
    "if",
    "else",
    "while",
    "local",
    "return",
    "version",
    "fire_interrupt",
    "dma_write",
    "send_output",
    "dma_read",
    "zext",
    "trunc",
    "ite",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    at: usize,
    typed_vars: bool,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(text)?,
            at: 0,
            typed_vars: false,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        let msg = format!("expected {}, found {}", expected.join(" or "), t.tok.describe());
        ParseError::new(t.pos, msg, expected)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<Pos, ParseError> {
        if self.is_punct(p) {
            Ok(self.bump().pos)
        } else {
            Err(self.error(&[&format!("`{p}`")]))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Pos, ParseError> {
        if self.is_kw(kw) {
            Ok(self.bump().pos)
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                Ok((s, self.bump().pos))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn int(&mut self) -> Result<(u64, Pos), ParseError> {
        match self.peek().tok {
            Tok::Int(v) => Ok((v, self.bump().pos)),
            _ => Err(self.error(&["integer"])),
        }
    }

    fn positive_u32(&mut self, what: &str) -> Result<u32, ParseError> {
        let (v, pos) = self.int()?;
        if v == 0 || v > u32::MAX as u64 {
            return Err(ParseError::new(
                pos,
                format!("{what} must be a positive integer"),
                vec![],
            ));
        }
        Ok(v as u32)
    }

    /// `u1`, `u8`, `u16`, `u32` or `u64`.
    fn width_type(&mut self) -> Result<u32, ParseError> {
        let t = self.peek().clone();
        if let Tok::Ident(s) = &t.tok {
            if let Some(w) = s.strip_prefix('u').and_then(|d| d.parse::<u32>().ok()) {
                if WIDTHS.contains(&w) {
                    self.bump();
                    return Ok(w);
                }
                return Err(ParseError::new(
                    t.pos,
                    format!("unsupported width {w}, expected one of 1, 8, 16, 32, 64"),
                    vec!["type".into()],
                ));
            }
        }
        Err(self.error(&["type (`u1`, `u8`, `u16`, `u32`, `u64`)"]))
    }

    fn width_literal(&mut self) -> Result<u32, ParseError> {
        let (v, pos) = self.int()?;
        if WIDTHS.contains(&(v as u32)) && v <= 64 {
            Ok(v as u32)
        } else {
            Err(ParseError::new(
                pos,
                format!("unsupported width {v}, expected one of 1, 8, 16, 32, 64"),
                vec![],
            ))
        }
    }

    // -- model level ---------------------------------------------------------

    pub(crate) fn model(&mut self) -> Result<DeviceModel, ParseError> {
        let pos = self.expect_kw("model")?;
        let (name, _) = self.ident()?;
        self.expect_punct("{")?;
        let mut version_tag = None;
        if self.is_kw("version") {
            self.bump();
            match self.peek().tok.clone() {
                Tok::Str(s) => {
                    self.bump();
                    version_tag = Some(s);
                }
                _ => return Err(self.error(&["string"])),
            }
            self.expect_punct(";")?;
        }
        self.expect_kw("state")?;
        self.expect_punct("{")?;
        let mut fields: Vec<FieldDecl> = Vec::new();
        loop {
            if !self.is_kw("reg") {
                if fields.is_empty() {
                    return Err(self.error(&["`reg`"]));
                }
                break;
            }
            self.bump();
            let (fname, fpos) = self.ident()?;
            if fields.iter().any(|f| f.name == fname) {
                return Err(ParseError::new(fpos, format!("duplicate field {fname}"), vec![]));
            }
            let len = if self.eat_punct("[") {
                let n = self.positive_u32("array length")?;
                self.expect_punct("]")?;
                Some(n)
            } else {
                None
            };
            self.expect_punct(":")?;
            let width = self.width_type()?;
            self.expect_punct(";")?;
            fields.push(FieldDecl {
                name: fname,
                len,
                width,
                pos: fpos,
            });
        }
        self.expect_punct("}")?;
        let mut handlers: Vec<Handler> = Vec::new();
        loop {
            if !self.is_kw("handler") {
                if handlers.is_empty() {
                    return Err(self.error(&["`handler`"]));
                }
                break;
            }
            let h = self.handler()?;
            if handlers.iter().any(|x| x.name == h.name) {
                return Err(ParseError::new(h.pos, format!("duplicate handler {}", h.name), vec![]));
            }
            handlers.push(h);
        }
        self.expect_punct("}")?;
        if self.peek().tok != Tok::Eof {
            return Err(self.error(&["end of input"]));
        }
        Ok(DeviceModel {
            name,
            version_tag,
            state_fields: fields,
            handlers,
            pos,
        })
    }

    fn handler(&mut self) -> Result<Handler, ParseError> {
        self.expect_kw("handler")?;
        let (name, pos) = self.ident()?;
        self.expect_punct("(")?;
        let mut params: Vec<Param> = Vec::new();
        let mut seen = HashSet::new();
        if !self.is_punct(")") {
            loop {
                let (pname, ppos) = self.ident()?;
                if !seen.insert(pname.clone()) {
                    return Err(ParseError::new(ppos, format!("duplicate parameter {pname}"), vec![]));
                }
                let len = if self.eat_punct("[") {
                    let n = self.positive_u32("array length")?;
                    self.expect_punct("]")?;
                    Some(n)
                } else {
                    None
                };
                self.expect_punct(":")?;
                let width = self.width_type()?;
                params.push(Param {
                    name: pname,
                    len,
                    width,
                    pos: ppos,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let return_width = if self.eat_punct("->") {
            Some(self.width_type()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(Handler {
            name,
            params,
            return_width,
            body,
            pos,
        })
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.peek().tok == Tok::Eof {
                return Err(self.error(&["`}`"]));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.peek().pos;
        let tok = self.peek().tok.clone();
        let kind = match &tok {
            Tok::Attr(a) => {
                let attr = match a.as_str() {
                    "elide" => {
                        self.bump();
                        LoopAttr::Elide
                    }
                    "unroll" => {
                        self.bump();
                        self.expect_punct("(")?;
                        let n = self.positive_u32("unroll count")?;
                        self.expect_punct(")")?;
                        LoopAttr::Unroll(n)
                    }
                    _ => return Err(self.error(&["`@elide`", "`@unroll`"])),
                };
                if !self.is_kw("while") {
                    return Err(self.error(&["`while`"]));
                }
                return self.while_stmt(attr);
            }
            Tok::Ident(k) => match k.as_str() {
                "while" => return self.while_stmt(LoopAttr::Default),
                "if" => return self.if_stmt(),
                "local" => {
                    self.bump();
                    let (name, _) = self.ident()?;
                    self.expect_punct(":")?;
                    let width = self.width_type()?;
                    let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                    self.expect_punct(";")?;
                    StmtKind::Local { name, width, init }
                }
                "return" => {
                    self.bump();
                    let e = self.expr()?;
                    self.expect_punct(";")?;
                    StmtKind::Return(e)
                }
                "fire_interrupt" | "send_output" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let e = self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    if k == "fire_interrupt" {
                        StmtKind::FireInterrupt(e)
                    } else {
                        StmtKind::SendOutput(e)
                    }
                }
                "dma_write" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let a = self.expr()?;
                    self.expect_punct(",")?;
                    let v = self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    StmtKind::DmaWrite(a, v)
                }
                _ => {
                    let (name, lpos) = self.ident().map_err(|_| self.error(&["statement"]))?;
                    let index = if self.eat_punct("[") {
                        let i = self.expr()?;
                        self.expect_punct("]")?;
                        Some(i)
                    } else {
                        None
                    };
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    self.expect_punct(";")?;
                    StmtKind::Assign {
                        target: LValue { name, index, pos: lpos },
                        value,
                    }
                }
            },
            _ => return Err(self.error(&["statement"])),
        };
        Ok(Stmt { kind, pos })
    }

    fn while_stmt(&mut self, attr: LoopAttr) -> Result<Stmt, ParseError> {
        let pos = self.expect_kw("while")?;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(Stmt {
            kind: StmtKind::While { cond, body, attr },
            pos,
        })
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.expect_kw("if")?;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then_block = self.block()?;
        let else_block = if self.is_kw("else") {
            self.bump();
            if self.is_kw("if") {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then_block,
                else_block,
            },
            pos,
        })
    }

    // -- expressions ---------------------------------------------------------

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.binary_level(0)?;
        let op = match &self.peek().tok {
            Tok::Punct("==") => BinaryOp::Eq,
            Tok::Punct("!=") => BinaryOp::Ne,
            Tok::Punct("<") => BinaryOp::Lt,
            Tok::Punct("<=") => BinaryOp::Le,
            Tok::Punct(">") => BinaryOp::Gt,
            Tok::Punct(">=") => BinaryOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.binary_level(0)?;
        if matches!(self.peek().tok, Tok::Punct("==" | "!=" | "<" | "<=" | ">" | ">=")) {
            return Err(ParseError::new(
                self.peek().pos,
                "comparison operators are non-associative; add parentheses",
                vec![],
            ));
        }
        let pos = lhs.pos;
        Ok(Expr {
            kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            pos,
        })
    }

    fn binary_level(&mut self, level: usize) -> Result<Expr, ParseError> {
        const LEVELS: [&[(&str, BinaryOp)]; 6] = [
            &[("|", BinaryOp::Or)],
            &[("^", BinaryOp::Xor)],
            &[("&", BinaryOp::And)],
            &[("<<", BinaryOp::Shl), (">>", BinaryOp::Lshr)],
            &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
            &[("*", BinaryOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let op = match &self.peek().tok {
                Tok::Punct(p) => LEVELS[level].iter().find(|(s, _)| s == p).map(|(_, op)| *op),
                _ => None,
            };
            let Some(op) = op else { break };
            self.bump();
            let rhs = self.binary_level(level + 1)?;
            let pos = lhs.pos;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.peek().pos;
        let op = match &self.peek().tok {
            Tok::Punct("~") | Tok::Punct("!") => Some(UnaryOp::Not),
            Tok::Punct("-") => Some(UnaryOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let arg = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(op, Box::new(arg)),
                pos,
            });
        }
        self.primary()
    }

    fn call_args(&mut self, n: usize) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                self.expect_punct(",")?;
            }
            args.push(self.expr()?);
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.peek().pos;
        let tok = self.peek().tok.clone();
        let kind = match tok {
            Tok::Int(v) => {
                self.bump();
                ExprKind::Int(v)
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            Tok::Ident(ref k) if k == "dma_read" => {
                self.bump();
                let mut a = self.call_args(1)?;
                ExprKind::DmaRead(Box::new(a.remove(0)))
            }
            Tok::Ident(ref k) if k == "zext" || k == "trunc" => {
                let is_zext = k == "zext";
                self.bump();
                self.expect_punct("<")?;
                let w = self.width_literal()?;
                self.expect_punct(">")?;
                let mut a = self.call_args(1)?;
                let arg = Box::new(a.remove(0));
                if is_zext {
                    ExprKind::ZExt(w, arg)
                } else {
                    ExprKind::Trunc(w, arg)
                }
            }
            Tok::Ident(ref k) if k == "ite" => {
                self.bump();
                let mut a = self.call_args(3)?.into_iter();
                let (c, t, e) = (a.next().unwrap(), a.next().unwrap(), a.next().unwrap());
                ExprKind::Ite(Box::new(c), Box::new(t), Box::new(e))
            }
            Tok::Ident(_) => {
                let (name, _) = self.ident().map_err(|_| self.error(&["expression"]))?;
                if self.eat_punct("[") {
                    let i = self.expr()?;
                    self.expect_punct("]")?;
                    ExprKind::Index(name, Box::new(i))
                } else if self.typed_vars
                    && self.is_punct(":")
                    && matches!(self.peek_at(1), Tok::Ident(s) if s.starts_with('u'))
                {
                    self.bump();
                    let w = self.width_type()?;
                    ExprKind::TypedVar(name, w)
                } else {
                    ExprKind::Ident(name)
                }
            }
            _ => return Err(self.error(&["expression"])),
        };
        Ok(Expr { kind, pos })
    }
}

/// Parses a free-standing expression in which variables may be introduced
/// inline as `name:uW`.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    p.typed_vars = true;
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.error(&["end of input"]));
    }
    Ok(e)
}
