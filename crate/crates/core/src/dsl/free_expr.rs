//! Free-standing expressions such as `x:u8 + 1 == 0`, lowered straight to
//! terms. A variable's width is given at any one of its occurrences.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{BinaryOp, Expr, ExprKind, UnaryOp};
use super::parser::parse_expr;
use super::ParseError;
use crate::term::{self, mask, BinOp, Term};

#[derive(Debug, Error)]
pub enum FreeExprError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{pos}: {msg}")]
    Type { pos: super::Pos, msg: String },
}

/// Parses `text` and builds its term.
pub fn free_expr_term(text: &str) -> Result<Term, FreeExprError> {
    let e = parse_expr(text)?;
    let mut vars = BTreeMap::new();
    collect(&e, &mut vars)?;
    Lower { vars }.expr(&e, None)
}

fn type_err(e: &Expr, msg: impl Into<String>) -> FreeExprError {
    FreeExprError::Type {
        pos: e.pos,
        msg: msg.into(),
    }
}

fn collect(e: &Expr, vars: &mut BTreeMap<String, u32>) -> Result<(), FreeExprError> {
    match &e.kind {
        ExprKind::TypedVar(n, w) => {
            if let Some(old) = vars.insert(n.clone(), *w) {
                if old != *w {
                    return Err(type_err(e, format!("{n} declared as u{old} and u{w}")));
                }
            }
        }
        ExprKind::Int(_) | ExprKind::Ident(_) => {}
        ExprKind::Index(..) | ExprKind::DmaRead(_) => {
            return Err(type_err(e, "arrays and intrinsics are not available here"))
        }
        ExprKind::Unary(_, a) | ExprKind::ZExt(_, a) | ExprKind::Trunc(_, a) => collect(a, vars)?,
        ExprKind::Binary(_, a, b) => {
            collect(a, vars)?;
            collect(b, vars)?;
        }
        ExprKind::Ite(c, a, b) => {
            collect(c, vars)?;
            collect(a, vars)?;
            collect(b, vars)?;
        }
    }
    Ok(())
}

struct Lower {
    vars: BTreeMap<String, u32>,
}

impl Lower {
    fn natural(&self, e: &Expr) -> Option<u32> {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Index(..) => None,
            ExprKind::DmaRead(_) => Some(64),
            ExprKind::Ident(n) | ExprKind::TypedVar(n, _) => self.vars.get(n).copied(),
            ExprKind::ZExt(w, _) | ExprKind::Trunc(w, _) => Some(*w),
            ExprKind::Unary(_, a) => self.natural(a),
            ExprKind::Binary(op, _, _) if op.is_comparison() => Some(1),
            ExprKind::Binary(_, a, b) | ExprKind::Ite(_, a, b) => self.natural(a).or_else(|| self.natural(b)),
        }
    }

    fn expr(&self, e: &Expr, expected: Option<u32>) -> Result<Term, FreeExprError> {
        let t = self.inner(e, expected)?;
        match expected {
            Some(w) if w != t.width() => Err(type_err(
                e,
                format!("width mismatch: expected u{w}, found u{}", t.width()),
            )),
            _ => Ok(t),
        }
    }

    fn inner(&self, e: &Expr, expected: Option<u32>) -> Result<Term, FreeExprError> {
        Ok(match &e.kind {
            ExprKind::Int(v) => {
                let w = expected.ok_or_else(|| type_err(e, "cannot infer width of literal"))?;
                if *v > mask(w) {
                    return Err(type_err(e, format!("literal {v} does not fit in u{w}")));
                }
                term::mk_const(w, *v)
            }
            ExprKind::Ident(n) | ExprKind::TypedVar(n, _) => match self.vars.get(n) {
                Some(w) => term::mk_var(n, *w),
                None => return Err(type_err(e, format!("{n} needs a width, e.g. {n}:u8"))),
            },
            ExprKind::Index(..) | ExprKind::DmaRead(_) => unreachable!("rejected by collect"),
            ExprKind::Unary(op, a) => {
                let a = self.expr(a, self.natural(a).or(expected))?;
                match op {
                    UnaryOp::Not => term::mk_not(&a),
                    UnaryOp::Neg => term::mk_neg(&a),
                }
            }
            ExprKind::Binary(op, a, b) => {
                let hint = if op.is_comparison() { None } else { expected };
                let w = self
                    .natural(a)
                    .or_else(|| self.natural(b))
                    .or(hint)
                    .ok_or_else(|| type_err(e, "cannot infer width of literal"))?;
                let l = self.expr(a, Some(w))?;
                let r = self.expr(b, Some(w))?;
                let bin = |op| term::mk_binary(op, &l, &r);
                match op {
                    BinaryOp::Add => bin(BinOp::Add),
                    BinaryOp::Sub => bin(BinOp::Sub),
                    BinaryOp::Mul => bin(BinOp::Mul),
                    BinaryOp::And => bin(BinOp::And),
                    BinaryOp::Or => bin(BinOp::Or),
                    BinaryOp::Xor => bin(BinOp::Xor),
                    BinaryOp::Shl => bin(BinOp::Shl),
                    BinaryOp::Lshr => bin(BinOp::Lshr),
                    BinaryOp::Eq => bin(BinOp::Eq),
                    BinaryOp::Ne => term::mk_ne(&l, &r),
                    BinaryOp::Lt => bin(BinOp::Ult),
                    BinaryOp::Le => bin(BinOp::Ule),
                    BinaryOp::Gt => term::mk_ult(&r, &l),
                    BinaryOp::Ge => term::mk_ule(&r, &l),
                }
            }
            ExprKind::ZExt(w, a) | ExprKind::Trunc(w, a) => {
                let from = self
                    .natural(a)
                    .ok_or_else(|| type_err(a, "cannot infer width of literal"))?;
                let a = self.expr(a, Some(from))?;
                if matches!(e.kind, ExprKind::ZExt(..)) {
                    if from > *w {
                        return Err(type_err(e, format!("cannot zext u{from} to u{w}")));
                    }
                    term::mk_zext(&a, *w)
                } else {
                    if from < *w {
                        return Err(type_err(e, format!("cannot trunc u{from} to u{w}")));
                    }
                    term::mk_trunc(&a, *w)
                }
            }
            ExprKind::Ite(c, a, b) => {
                let c = self.expr(c, Some(1))?;
                let w = self
                    .natural(a)
                    .or_else(|| self.natural(b))
                    .or(expected)
                    .ok_or_else(|| type_err(e, "cannot infer width of literal"))?;
                term::mk_ite(&c, &self.expr(a, Some(w))?, &self.expr(b, Some(w))?)
            }
        })
    }
}
