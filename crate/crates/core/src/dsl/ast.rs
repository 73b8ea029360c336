//! Surface syntax tree for `.dm` device models.

use std::fmt;

/// 1-based line and column into the source text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceModel {
    pub name: String,
    pub version_tag: Option<String>,
    pub state_fields: Vec<FieldDecl>,
    pub handlers: Vec<Handler>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    /// `Some(n)` for `reg name[n] : uW`.
    pub len: Option<u32>,
    pub width: u32,
    pub pos: Pos,
}

impl FieldDecl {
    pub fn elements(&self) -> u32 {
        self.len.unwrap_or(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub len: Option<u32>,
    pub width: u32,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    pub name: String,
    pub params: Vec<Param>,
    pub return_width: Option<u32>,
    pub body: Block,
    pub pos: Pos,
}

pub type Block = Vec<Stmt>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopAttr {
    Default,
    Elide,
    Unroll(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    /// `local name : uW (= init)?;`, a handler-scoped, zero-initialised variable.
    Local {
        name: String,
        width: u32,
        init: Option<Expr>,
    },
    Assign {
        target: LValue,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        cond: Expr,
        body: Block,
        attr: LoopAttr,
    },
    FireInterrupt(Expr),
    DmaWrite(Expr, Expr),
    SendOutput(Expr),
    Return(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LValue {
    pub name: String,
    pub index: Option<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::Shl => "<<",
            BinaryOp::Lshr => ">>",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Int(u64),
    Ident(String),
    Index(String, Box<Expr>),
    DmaRead(Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    ZExt(u32, Box<Expr>),
    Trunc(u32, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `name : uW`, only accepted by the free-standing expression parser.
    TypedVar(String, u32),
}

impl DeviceModel {
    pub fn handler(&self, name: &str) -> Option<&Handler> {
        self.handlers.iter().find(|h| h.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.state_fields.iter().find(|f| f.name == name)
    }

    /// Resets every position to the default, for position-insensitive
    /// structural comparison.
    pub fn without_positions(&self) -> DeviceModel {
        let mut m = self.clone();
        m.pos = Pos::default();
        for f in &mut m.state_fields {
            f.pos = Pos::default();
        }
        for h in &mut m.handlers {
            h.pos = Pos::default();
            for p in &mut h.params {
                p.pos = Pos::default();
            }
            clear_block(&mut h.body);
        }
        m
    }
}

fn clear_block(b: &mut Block) {
    for s in b {
        s.pos = Pos::default();
        match &mut s.kind {
            StmtKind::Local { init, .. } => {
                if let Some(e) = init {
                    clear_expr(e)
                }
            }
            StmtKind::Assign { target, value } => {
                target.pos = Pos::default();
                if let Some(i) = &mut target.index {
                    clear_expr(i);
                }
                clear_expr(value);
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                clear_expr(cond);
                clear_block(then_block);
                if let Some(e) = else_block {
                    clear_block(e);
                }
            }
            StmtKind::While { cond, body, .. } => {
                clear_expr(cond);
                clear_block(body);
            }
            StmtKind::FireInterrupt(e) | StmtKind::SendOutput(e) | StmtKind::Return(e) => clear_expr(e),
            StmtKind::DmaWrite(a, v) => {
                clear_expr(a);
                clear_expr(v);
            }
        }
    }
}

fn clear_expr(e: &mut Expr) {
    e.pos = Pos::default();
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Ident(_) | ExprKind::TypedVar(..) => {}
        ExprKind::Index(_, i) | ExprKind::DmaRead(i) => clear_expr(i),
        ExprKind::Unary(_, a) | ExprKind::ZExt(_, a) | ExprKind::Trunc(_, a) => clear_expr(a),
        ExprKind::Binary(_, a, b) => {
            clear_expr(a);
            clear_expr(b);
        }
        ExprKind::Ite(c, a, b) => {
            clear_expr(c);
            clear_expr(a);
            clear_expr(b);
        }
    }
}
