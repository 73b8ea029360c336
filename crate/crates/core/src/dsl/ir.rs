//! Width-annotated, name-resolved form of a handler body. This is what
//! the interpreters execute.

use crate::term::{BinOp, UnOp};

use super::ast::LoopAttr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HandlerKind {
    MmioRead,
    MmioWrite,
    EnvInput,
}

impl HandlerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HandlerKind::MmioRead => "mmio_read",
            HandlerKind::MmioWrite => "mmio_write",
            HandlerKind::EnvInput => "env_input",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldInfo {
    pub name: String,
    pub width: u32,
    /// Number of elements; 1 for scalars.
    pub len: u32,
    pub is_array: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub width: u32,
    pub len: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalInfo {
    pub name: String,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerIr {
    pub name: String,
    pub kind: HandlerKind,
    pub params: Vec<ParamInfo>,
    pub return_width: Option<u32>,
    pub locals: Vec<LocalInfo>,
    pub body: Vec<IrStmt>,
    /// Number of static `dma_read` call sites, numbered in preorder.
    pub dma_callsites: usize,
}

impl HandlerIr {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Place {
    Field { field: usize, index: Option<IrExpr> },
    Local(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IrStmt {
    Assign {
        place: Place,
        value: IrExpr,
    },
    If {
        cond: IrExpr,
        then_body: Vec<IrStmt>,
        else_body: Vec<IrStmt>,
    },
    While {
        cond: IrExpr,
        body: Vec<IrStmt>,
        attr: LoopAttr,
    },
    /// End of an unrolled loop: the path stops as bound-exhausted if `cond`
    /// can still hold here.
    LoopBound {
        cond: IrExpr,
    },
    FireInterrupt(IrExpr),
    DmaWrite(IrExpr, IrExpr),
    SendOutput(IrExpr),
    Return(IrExpr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrExpr {
    pub width: u32,
    pub kind: IrExprKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IrExprKind {
    Const(u64),
    Field { field: usize, index: Option<Box<IrExpr>> },
    Param { param: usize, index: Option<Box<IrExpr>> },
    Local(usize),
    DmaRead { callsite: usize, addr: Box<IrExpr> },
    Unary(UnOp, Box<IrExpr>),
    Binary(BinOp, Box<IrExpr>, Box<IrExpr>),
    ZExt(Box<IrExpr>),
    Trunc(Box<IrExpr>),
    Ite(Box<IrExpr>, Box<IrExpr>, Box<IrExpr>),
}

impl IrExpr {
    pub fn visit(&self, f: &mut impl FnMut(&IrExpr)) {
        f(self);
        match &self.kind {
            IrExprKind::Const(_) | IrExprKind::Local(_) => {}
            IrExprKind::Field { index, .. } | IrExprKind::Param { index, .. } => {
                if let Some(i) = index {
                    i.visit(f);
                }
            }
            IrExprKind::DmaRead { addr, .. } => addr.visit(f),
            IrExprKind::Unary(_, a) | IrExprKind::ZExt(a) | IrExprKind::Trunc(a) => a.visit(f),
            IrExprKind::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            IrExprKind::Ite(c, a, b) => {
                c.visit(f);
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

/// Calls `f` on every statement, depth first, and `g` on every expression.
pub fn walk_stmts(body: &[IrStmt], f: &mut impl FnMut(&IrStmt), g: &mut impl FnMut(&IrExpr)) {
    for s in body {
        f(s);
        match s {
            IrStmt::Assign { place, value } => {
                if let Place::Field { index: Some(i), .. } = place {
                    i.visit(g);
                }
                value.visit(g);
            }
            IrStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                cond.visit(g);
                walk_stmts(then_body, f, g);
                walk_stmts(else_body, f, g);
            }
            IrStmt::While { cond, body, .. } => {
                cond.visit(g);
                walk_stmts(body, f, g);
            }
            IrStmt::LoopBound { cond } => cond.visit(g),
            IrStmt::FireInterrupt(e) | IrStmt::SendOutput(e) | IrStmt::Return(e) => e.visit(g),
            IrStmt::DmaWrite(a, v) => {
                a.visit(g);
                v.visit(g);
            }
        }
    }
}
