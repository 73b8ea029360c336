//! Name resolution, width checking and lowering to [`super::ir`].

use std::fmt;

use thiserror::Error;

use super::ast::*;
use super::ir::*;
use crate::term::{mask, BinOp, UnOp};

/// A device model whose handlers passed every static check.
///
/// Immutable once built; safe to share between threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidatedModel {
    ast: DeviceModel,
    fields: Vec<FieldInfo>,
    handlers: Vec<HandlerIr>,
}

impl ValidatedModel {
    pub fn ast(&self) -> &DeviceModel {
        &self.ast
    }

    pub fn name(&self) -> &str {
        &self.ast.name
    }

    /// Explicit `version "..."` tag, falling back to the model name.
    pub fn version_tag(&self) -> &str {
        self.ast.version_tag.as_deref().unwrap_or(&self.ast.name)
    }

    pub fn fields(&self) -> &[FieldInfo] {
        &self.fields
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn handlers(&self) -> &[HandlerIr] {
        &self.handlers
    }

    pub fn handler(&self, name: &str) -> Option<&HandlerIr> {
        self.handlers.iter().find(|h| h.name == name)
    }

    pub(crate) fn with_handlers(&self, handlers: Vec<HandlerIr>) -> ValidatedModel {
        ValidatedModel {
            ast: self.ast.clone(),
            fields: self.fields.clone(),
            handlers,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    UnresolvedIdentifier(String),
    WidthMismatch { expected: u32, found: u32 },
    CannotInferWidth,
    LiteralOutOfRange { value: u64, width: u32 },
    BadHandlerSignature(String),
    ReturnOutsideRead,
    NotAnArray(String),
    MissingIndex(String),
    AssignToParameter(String),
    DuplicateName(String),
    BadCast { from: u32, to: u32 },
    Unsupported(String),
    ElidedLoopWritesState(String),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::UnresolvedIdentifier(n) => write!(f, "unresolved identifier {n}"),
            Rule::WidthMismatch { expected, found } => {
                write!(f, "width mismatch: expected u{expected}, found u{found}")
            }
            Rule::CannotInferWidth => write!(f, "cannot infer width of literal expression"),
            Rule::LiteralOutOfRange { value, width } => {
                write!(f, "literal {value} does not fit in u{width}")
            }
            Rule::BadHandlerSignature(why) => write!(f, "bad handler signature: {why}"),
            Rule::ReturnOutsideRead => write!(f, "return outside mmio_read handler"),
            Rule::NotAnArray(n) => write!(f, "{n} is not an array"),
            Rule::MissingIndex(n) => write!(f, "array {n} used without an index"),
            Rule::AssignToParameter(n) => write!(f, "cannot assign to parameter {n}"),
            Rule::DuplicateName(n) => write!(f, "duplicate name {n}"),
            Rule::BadCast { from, to } => write!(f, "cannot convert u{from} to u{to}"),
            Rule::Unsupported(what) => write!(f, "{what} not allowed here"),
            Rule::ElidedLoopWritesState(n) => write!(f, "elided loop writes state field {n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {rule} (in {context})")]
pub struct ValidationError {
    pub pos: Pos,
    /// Handler name, or the model name for model-level problems.
    pub context: String,
    pub rule: Rule,
}

pub fn validate_model(m: &DeviceModel) -> Result<ValidatedModel, ValidationError> {
    let fields: Vec<FieldInfo> = m
        .state_fields
        .iter()
        .map(|f| FieldInfo {
            name: f.name.clone(),
            width: f.width,
            len: f.elements(),
            is_array: f.len.is_some(),
        })
        .collect();
    let mut handlers = Vec::with_capacity(m.handlers.len());
    for h in &m.handlers {
        handlers.push(HandlerChecker::new(&fields, h)?.lower(h)?);
    }
    Ok(ValidatedModel {
        ast: m.clone(),
        fields,
        handlers,
    })
}

fn infer_kind(h: &Handler) -> Result<HandlerKind, String> {
    let names: Vec<&str> = h.params.iter().map(|p| p.name.as_str()).collect();
    let scalar = |i: usize| h.params[i].len.is_none();
    let kind = if h.return_width.is_some() {
        if names != ["offset"] || !scalar(0) {
            return Err("a handler returning a value must take exactly (offset)".into());
        }
        HandlerKind::MmioRead
    } else if names == ["offset", "value"] {
        if !scalar(0) || !scalar(1) {
            return Err("offset and value must be scalars".into());
        }
        HandlerKind::MmioWrite
    } else if names == ["data", "len"] {
        let (d, l) = (&h.params[0], &h.params[1]);
        if d.len.is_none() || d.width != 8 {
            return Err("data must be a byte array, e.g. data[64] : u8".into());
        }
        if l.len.is_some() || l.width != 8 {
            return Err("len must be a byte".into());
        }
        HandlerKind::EnvInput
    } else {
        return Err(format!(
            "parameters ({}) match no handler kind; expected (offset) -> uW, (offset, value) or (data[N], len)",
            names.join(", ")
        ));
    };
    let named_kind = [HandlerKind::MmioRead, HandlerKind::MmioWrite, HandlerKind::EnvInput]
        .into_iter()
        .find(|k| k.as_str() == h.name);
    match named_kind {
        Some(k) if k != kind => Err(format!(
            "handler named {} has the signature of {}",
            h.name,
            kind.as_str()
        )),
        _ => Ok(kind),
    }
}

enum Resolved {
    Field(usize),
    Param(usize),
    Local(usize),
}

struct HandlerChecker<'a> {
    fields: &'a [FieldInfo],
    params: Vec<ParamInfo>,
    locals: Vec<LocalInfo>,
    kind: HandlerKind,
    return_width: Option<u32>,
    dma_callsites: usize,
    context: String,
}

impl<'a> HandlerChecker<'a> {
    fn new(fields: &'a [FieldInfo], h: &Handler) -> Result<Self, ValidationError> {
        let kind = infer_kind(h).map_err(|why| ValidationError {
            pos: h.pos,
            context: h.name.clone(),
            rule: Rule::BadHandlerSignature(why),
        })?;
        let params: Vec<ParamInfo> = h
            .params
            .iter()
            .map(|p| ParamInfo {
                name: p.name.clone(),
                width: p.width,
                len: p.len,
            })
            .collect();
        for p in &h.params {
            if fields.iter().any(|f| f.name == p.name) {
                return Err(ValidationError {
                    pos: p.pos,
                    context: h.name.clone(),
                    rule: Rule::DuplicateName(p.name.clone()),
                });
            }
        }
        Ok(HandlerChecker {
            fields,
            params,
            locals: Vec::new(),
            kind,
            return_width: h.return_width,
            dma_callsites: 0,
            context: h.name.clone(),
        })
    }

    fn err(&self, pos: Pos, rule: Rule) -> ValidationError {
        ValidationError {
            pos,
            context: self.context.clone(),
            rule,
        }
    }

    fn lower(mut self, h: &Handler) -> Result<HandlerIr, ValidationError> {
        let body = self.block(&h.body)?;
        Ok(HandlerIr {
            name: h.name.clone(),
            kind: self.kind,
            params: self.params,
            return_width: self.return_width,
            locals: self.locals,
            body,
            dma_callsites: self.dma_callsites,
        })
    }

    fn resolve(&self, name: &str) -> Option<Resolved> {
        if let Some(i) = self.locals.iter().position(|l| l.name == name) {
            return Some(Resolved::Local(i));
        }
        if let Some(i) = self.params.iter().position(|p| p.name == name) {
            return Some(Resolved::Param(i));
        }
        self.fields.iter().position(|f| f.name == name).map(Resolved::Field)
    }

    fn block(&mut self, b: &Block) -> Result<Vec<IrStmt>, ValidationError> {
        b.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> Result<IrStmt, ValidationError> {
        Ok(match &s.kind {
            StmtKind::Local { name, width, init } => {
                if self.resolve(name).is_some() {
                    return Err(self.err(s.pos, Rule::DuplicateName(name.clone())));
                }
                let value = match init {
                    Some(e) => self.expr(e, Some(*width))?,
                    None => IrExpr {
                        width: *width,
                        kind: IrExprKind::Const(0),
                    },
                };
                self.locals.push(LocalInfo {
                    name: name.clone(),
                    width: *width,
                });
                IrStmt::Assign {
                    place: Place::Local(self.locals.len() - 1),
                    value,
                }
            }
            StmtKind::Assign { target, value } => {
                let (place, width) = self.place(target)?;
                let value = self.expr(value, Some(width))?;
                IrStmt::Assign { place, value }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let cond = self.expr(cond, Some(1))?;
                let then_body = self.block(then_block)?;
                let else_body = match else_block {
                    Some(b) => self.block(b)?,
                    None => Vec::new(),
                };
                IrStmt::If {
                    cond,
                    then_body,
                    else_body,
                }
            }
            StmtKind::While { cond, body, attr } => {
                let cond = self.expr(cond, Some(1))?;
                let body = self.block(body)?;
                IrStmt::While {
                    cond,
                    body,
                    attr: *attr,
                }
            }
            StmtKind::FireInterrupt(e) => IrStmt::FireInterrupt(self.expr_or(e, 8)?),
            StmtKind::SendOutput(e) => IrStmt::SendOutput(self.expr_or(e, 8)?),
            StmtKind::DmaWrite(a, v) => {
                let a = self.expr_or(a, 64)?;
                let v = self.expr_or(v, 64)?;
                IrStmt::DmaWrite(a, v)
            }
            StmtKind::Return(e) => {
                let Some(w) = self.return_width else {
                    return Err(self.err(s.pos, Rule::ReturnOutsideRead));
                };
                IrStmt::Return(self.expr(e, Some(w))?)
            }
        })
    }

    fn place(&mut self, lv: &LValue) -> Result<(Place, u32), ValidationError> {
        match self.resolve(&lv.name) {
            None => Err(self.err(lv.pos, Rule::UnresolvedIdentifier(lv.name.clone()))),
            Some(Resolved::Param(_)) => Err(self.err(lv.pos, Rule::AssignToParameter(lv.name.clone()))),
            Some(Resolved::Local(i)) => {
                if lv.index.is_some() {
                    return Err(self.err(lv.pos, Rule::NotAnArray(lv.name.clone())));
                }
                Ok((Place::Local(i), self.locals[i].width))
            }
            Some(Resolved::Field(i)) => {
                let f = &self.fields[i];
                let width = f.width;
                let index = match (&lv.index, f.is_array) {
                    (Some(e), true) => Some(self.expr_or(e, 64)?),
                    (None, false) => None,
                    (Some(_), false) => return Err(self.err(lv.pos, Rule::NotAnArray(lv.name.clone()))),
                    (None, true) => return Err(self.err(lv.pos, Rule::MissingIndex(lv.name.clone()))),
                };
                Ok((Place::Field { field: i, index }, width))
            }
        }
    }

    /// Width an expression has without any contextual hint, if any.
    fn natural_width(&self, e: &Expr) -> Option<u32> {
        match &e.kind {
            ExprKind::Int(_) => None,
            ExprKind::Ident(n) | ExprKind::Index(n, _) => match self.resolve(n)? {
                Resolved::Field(i) => Some(self.fields[i].width),
                Resolved::Param(i) => Some(self.params[i].width),
                Resolved::Local(i) => Some(self.locals[i].width),
            },
            ExprKind::TypedVar(_, w) | ExprKind::ZExt(w, _) | ExprKind::Trunc(w, _) => Some(*w),
            ExprKind::DmaRead(_) => Some(64),
            ExprKind::Unary(_, a) => self.natural_width(a),
            ExprKind::Binary(op, _, _) if op.is_comparison() => Some(1),
            ExprKind::Binary(_, a, b) => self.natural_width(a).or_else(|| self.natural_width(b)),
            ExprKind::Ite(_, a, b) => self.natural_width(a).or_else(|| self.natural_width(b)),
        }
    }

    fn expr_or(&mut self, e: &Expr, fallback: u32) -> Result<IrExpr, ValidationError> {
        let w = self.natural_width(e).unwrap_or(fallback);
        self.expr(e, Some(w))
    }

    fn expr(&mut self, e: &Expr, expected: Option<u32>) -> Result<IrExpr, ValidationError> {
        let lowered = self.expr_inner(e, expected)?;
        if let Some(w) = expected {
            if lowered.width != w {
                return Err(self.err(
                    e.pos,
                    Rule::WidthMismatch {
                        expected: w,
                        found: lowered.width,
                    },
                ));
            }
        }
        Ok(lowered)
    }

    fn expr_inner(&mut self, e: &Expr, expected: Option<u32>) -> Result<IrExpr, ValidationError> {
        let mk = |width, kind| IrExpr { width, kind };
        Ok(match &e.kind {
            ExprKind::Int(v) => {
                let Some(w) = expected else {
                    return Err(self.err(e.pos, Rule::CannotInferWidth));
                };
                if *v > mask(w) {
                    return Err(self.err(e.pos, Rule::LiteralOutOfRange { value: *v, width: w }));
                }
                mk(w, IrExprKind::Const(*v))
            }
            ExprKind::TypedVar(..) => return Err(self.err(e.pos, Rule::Unsupported("typed variable".into()))),
            ExprKind::Ident(n) => match self.resolve(n) {
                None => return Err(self.err(e.pos, Rule::UnresolvedIdentifier(n.clone()))),
                Some(Resolved::Local(i)) => mk(self.locals[i].width, IrExprKind::Local(i)),
                Some(Resolved::Param(i)) => {
                    let p = &self.params[i];
                    if p.len.is_some() {
                        return Err(self.err(e.pos, Rule::MissingIndex(n.clone())));
                    }
                    mk(p.width, IrExprKind::Param { param: i, index: None })
                }
                Some(Resolved::Field(i)) => {
                    let f = &self.fields[i];
                    if f.is_array {
                        return Err(self.err(e.pos, Rule::MissingIndex(n.clone())));
                    }
                    mk(f.width, IrExprKind::Field { field: i, index: None })
                }
            },
            ExprKind::Index(n, idx) => match self.resolve(n) {
                None => return Err(self.err(e.pos, Rule::UnresolvedIdentifier(n.clone()))),
                Some(Resolved::Local(_)) => return Err(self.err(e.pos, Rule::NotAnArray(n.clone()))),
                Some(Resolved::Param(i)) => {
                    if self.params[i].len.is_none() {
                        return Err(self.err(e.pos, Rule::NotAnArray(n.clone())));
                    }
                    let width = self.params[i].width;
                    let index = Some(Box::new(self.expr_or(idx, 64)?));
                    mk(width, IrExprKind::Param { param: i, index })
                }
                Some(Resolved::Field(i)) => {
                    if !self.fields[i].is_array {
                        return Err(self.err(e.pos, Rule::NotAnArray(n.clone())));
                    }
                    let width = self.fields[i].width;
                    let index = Some(Box::new(self.expr_or(idx, 64)?));
                    mk(width, IrExprKind::Field { field: i, index })
                }
            },
            ExprKind::DmaRead(addr) => {
                let callsite = self.dma_callsites;
                self.dma_callsites += 1;
                let addr = Box::new(self.expr_or(addr, 64)?);
                mk(64, IrExprKind::DmaRead { callsite, addr })
            }
            ExprKind::Unary(op, a) => {
                let a = self.expr(a, self.natural_width(a).or(expected))?;
                let op = match op {
                    UnaryOp::Not => UnOp::Not,
                    UnaryOp::Neg => UnOp::Neg,
                };
                mk(a.width, IrExprKind::Unary(op, Box::new(a)))
            }
            ExprKind::Binary(op, a, b) => {
                let hint = if op.is_comparison() { None } else { expected };
                let w = self
                    .natural_width(a)
                    .or_else(|| self.natural_width(b))
                    .or(hint)
                    .ok_or_else(|| self.err(e.pos, Rule::CannotInferWidth))?;
                let l = self.expr(a, Some(w))?;
                let r = self.expr(b, Some(w))?;
                let bin = |op, l, r| IrExprKind::Binary(op, Box::new(l), Box::new(r));
                match op {
                    BinaryOp::Add => mk(w, bin(BinOp::Add, l, r)),
                    BinaryOp::Sub => mk(w, bin(BinOp::Sub, l, r)),
                    BinaryOp::Mul => mk(w, bin(BinOp::Mul, l, r)),
                    BinaryOp::And => mk(w, bin(BinOp::And, l, r)),
                    BinaryOp::Or => mk(w, bin(BinOp::Or, l, r)),
                    BinaryOp::Xor => mk(w, bin(BinOp::Xor, l, r)),
                    BinaryOp::Shl => mk(w, bin(BinOp::Shl, l, r)),
                    BinaryOp::Lshr => mk(w, bin(BinOp::Lshr, l, r)),
                    BinaryOp::Eq => mk(1, bin(BinOp::Eq, l, r)),
                    BinaryOp::Ne => mk(1, IrExprKind::Unary(UnOp::Not, Box::new(mk(1, bin(BinOp::Eq, l, r))))),
                    BinaryOp::Lt => mk(1, bin(BinOp::Ult, l, r)),
                    BinaryOp::Le => mk(1, bin(BinOp::Ule, l, r)),
                    BinaryOp::Gt => mk(1, bin(BinOp::Ult, r, l)),
                    BinaryOp::Ge => mk(1, bin(BinOp::Ule, r, l)),
                }
            }
            ExprKind::ZExt(w, a) | ExprKind::Trunc(w, a) => {
                let is_zext = matches!(e.kind, ExprKind::ZExt(..));
                let from = self
                    .natural_width(a)
                    .ok_or_else(|| self.err(a.pos, Rule::CannotInferWidth))?;
                let ok = if is_zext { from <= *w } else { from >= *w };
                if !ok {
                    return Err(self.err(e.pos, Rule::BadCast { from, to: *w }));
                }
                let a = Box::new(self.expr(a, Some(from))?);
                if is_zext {
                    mk(*w, IrExprKind::ZExt(a))
                } else {
                    mk(*w, IrExprKind::Trunc(a))
                }
            }
            ExprKind::Ite(c, a, b) => {
                let c = self.expr(c, Some(1))?;
                let w = self
                    .natural_width(a)
                    .or_else(|| self.natural_width(b))
                    .or(expected)
                    .ok_or_else(|| self.err(e.pos, Rule::CannotInferWidth))?;
                let a = self.expr(a, Some(w))?;
                let b = self.expr(b, Some(w))?;
                mk(w, IrExprKind::Ite(Box::new(c), Box::new(a), Box::new(b)))
            }
        })
    }
}
