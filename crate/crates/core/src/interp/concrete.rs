//! Plain concrete execution. The operator rules here are written out
//! independently of the term layer so the two can check each other.

use std::collections::BTreeMap;

use crate::dsl::ast::LoopAttr;
use crate::dsl::ir::{HandlerIr, IrExpr, IrExprKind, IrStmt, Place};
use crate::dsl::ValidatedModel;
use crate::term::{Assignment, BinOp, UnOp};

use super::{InterpError, PathStatus};

/// Field name to element values.
pub type ConcreteState = BTreeMap<String, Vec<u64>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConcreteArg {
    Scalar(u64),
    Array(Vec<u64>),
}

/// Values returned by `dma_read`, keyed by (callsite, occurrence).
/// Unlisted reads return 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DmaOracle(BTreeMap<(usize, u32), u64>);

impl DmaOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, callsite: usize, occurrence: u32, value: u64) {
        self.0.insert((callsite, occurrence), value);
    }

    pub fn get(&self, callsite: usize, occurrence: u32) -> u64 {
        self.0.get(&(callsite, occurrence)).copied().unwrap_or(0)
    }

    /// Picks up every `dma.<handler>.<callsite>.<occurrence>` variable.
    pub fn from_assignment(handler: &str, a: &Assignment) -> Self {
        let prefix = format!("dma.{handler}.");
        let mut out = DmaOracle::new();
        for (name, v) in a.iter() {
            let Some(rest) = name.strip_prefix(&prefix) else {
                continue;
            };
            let mut parts = rest.split('.');
            if let (Some(Ok(s)), Some(Ok(k)), None) =
                (parts.next().map(str::parse), parts.next().map(str::parse), parts.next())
            {
                out.set(s, k, v);
            }
        }
        out
    }
}

/// A side effect with its evaluated arguments as (width, value).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConcreteEffect {
    pub kind: &'static str,
    pub args: Vec<(u32, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteOutcome {
    pub state: ConcreteState,
    /// Present for mmio_read handlers that complete normally.
    pub ret: Option<u64>,
    pub effects: Vec<ConcreteEffect>,
    pub status: PathStatus,
}

fn ones(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

fn binary(op: BinOp, w: u32, a: u64, b: u64) -> u64 {
    let m = ones(w);
    match op {
        BinOp::Add => a.wrapping_add(b) & m,
        BinOp::Sub => a.wrapping_sub(b) & m,
        BinOp::Mul => ((a as u128 * b as u128) as u64) & m,
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Shl if b >= w as u64 => 0,
        BinOp::Shl => (a << b) & m,
        BinOp::Lshr if b >= w as u64 => 0,
        BinOp::Lshr => a >> b,
        BinOp::Eq => (a == b) as u64,
        BinOp::Ult => (a < b) as u64,
        BinOp::Ule => (a <= b) as u64,
    }
}

enum Flow {
    Next,
    Return(u64),
    Stop(PathStatus),
}

struct Machine<'a> {
    h: &'a HandlerIr,
    state: Vec<(String, Vec<u64>)>,
    args: &'a [ConcreteArg],
    locals: Vec<u64>,
    dma: &'a DmaOracle,
    dma_occ: Vec<u32>,
    effects: Vec<ConcreteEffect>,
    loop_bound: u32,
}

/// Executes handler `h` once. `state` must list every declared field with
/// the right number of elements.
pub fn run_concrete(
    m: &ValidatedModel,
    h: &str,
    state: &ConcreteState,
    args: &[ConcreteArg],
    dma: &DmaOracle,
    loop_bound: u32,
) -> Result<ConcreteOutcome, InterpError> {
    let handler = m.handler(h).ok_or_else(|| InterpError::UnknownHandler(h.to_string()))?;
    let mut fields = Vec::with_capacity(m.fields().len());
    for f in m.fields() {
        match state.get(&f.name) {
            Some(v) if v.len() == f.len as usize => {
                fields.push((f.name.clone(), v.iter().map(|x| x & ones(f.width)).collect()))
            }
            _ => return Err(InterpError::EnvMismatch(m.name().to_string())),
        }
    }
    if args.len() != handler.params.len() {
        return Err(InterpError::BadArguments {
            handler: h.to_string(),
            msg: format!("expected {} arguments, got {}", handler.params.len(), args.len()),
        });
    }
    let mut mach = Machine {
        h: handler,
        state: fields,
        args,
        locals: vec![0; handler.locals.len()],
        dma,
        dma_occ: vec![0; handler.dma_callsites],
        effects: Vec::new(),
        loop_bound,
    };
    let flow = mach.block(&handler.body);
    let (ret, status) = match flow {
        Flow::Next => (handler.return_width.map(|_| 0), PathStatus::Complete),
        Flow::Return(v) => (Some(v), PathStatus::Complete),
        Flow::Stop(s) => (None, s),
    };
    Ok(ConcreteOutcome {
        state: mach.state.into_iter().collect(),
        ret,
        effects: mach.effects,
        status,
    })
}

impl Machine<'_> {
    fn block(&mut self, body: &[IrStmt]) -> Flow {
        for s in body {
            match self.stmt(s) {
                Flow::Next => {}
                other => return other,
            }
        }
        Flow::Next
    }

    /// First failing bounds check, in evaluation order.
    fn checked(checks: Vec<(String, bool)>) -> Result<(), Flow> {
        match checks.into_iter().find(|(_, ok)| !ok) {
            Some((field, _)) => Err(Flow::Stop(PathStatus::OutOfBounds { field })),
            None => Ok(()),
        }
    }

    fn stmt(&mut self, s: &IrStmt) -> Flow {
        let mut checks = Vec::new();
        macro_rules! ok {
            () => {
                if let Err(f) = Self::checked(std::mem::take(&mut checks)) {
                    return f;
                }
            };
        }
        match s {
            IrStmt::Assign { place, value } => {
                let idx = match place {
                    Place::Field { field, index: Some(ix) } => {
                        let i = self.expr(ix, &mut checks);
                        let (name, elems) = &self.state[*field];
                        checks.push((name.clone(), i < elems.len() as u64));
                        Some(i)
                    }
                    _ => None,
                };
                let v = self.expr(value, &mut checks);
                ok!();
                match place {
                    Place::Local(l) => self.locals[*l] = v,
                    Place::Field { field, .. } => {
                        self.state[*field].1[idx.unwrap_or(0) as usize] = v;
                    }
                }
                Flow::Next
            }
            IrStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let c = self.expr(cond, &mut checks);
                ok!();
                if c == 1 {
                    self.block(then_body)
                } else {
                    self.block(else_body)
                }
            }
            IrStmt::While { cond, body, attr } => {
                let bound = match attr {
                    LoopAttr::Elide => return Flow::Next,
                    LoopAttr::Unroll(n) => *n,
                    LoopAttr::Default => self.loop_bound,
                };
                let mut iter = 0;
                loop {
                    let c = self.expr(cond, &mut checks);
                    ok!();
                    if c != 1 {
                        return Flow::Next;
                    }
                    if iter == bound {
                        return Flow::Stop(PathStatus::BoundExhausted);
                    }
                    iter += 1;
                    match self.block(body) {
                        Flow::Next => {}
                        other => return other,
                    }
                }
            }
            IrStmt::LoopBound { cond } => {
                let c = self.expr(cond, &mut checks);
                ok!();
                if c == 1 {
                    Flow::Stop(PathStatus::BoundExhausted)
                } else {
                    Flow::Next
                }
            }
            IrStmt::FireInterrupt(e) => {
                let line = self.expr(e, &mut checks);
                ok!();
                self.effect("interrupt", vec![(e.width, line)]);
                Flow::Next
            }
            IrStmt::SendOutput(e) => {
                let v = self.expr(e, &mut checks);
                ok!();
                self.effect("output", vec![(e.width, v)]);
                Flow::Next
            }
            IrStmt::DmaWrite(a, v) => {
                let addr = self.expr(a, &mut checks);
                let val = self.expr(v, &mut checks);
                ok!();
                self.effect("dma_write", vec![(a.width, addr), (v.width, val)]);
                Flow::Next
            }
            IrStmt::Return(e) => {
                let v = self.expr(e, &mut checks);
                ok!();
                Flow::Return(v)
            }
        }
    }

    fn effect(&mut self, kind: &'static str, args: Vec<(u32, u64)>) {
        self.effects.push(ConcreteEffect { kind, args });
    }

    fn expr(&mut self, e: &IrExpr, checks: &mut Vec<(String, bool)>) -> u64 {
        let w = e.width;
        match &e.kind {
            IrExprKind::Const(v) => *v,
            IrExprKind::Local(l) => self.locals[*l],
            IrExprKind::Field { field, index } => match index {
                None => self.state[*field].1[0],
                Some(ix) => {
                    let i = self.expr(ix, checks);
                    let (name, elems) = &self.state[*field];
                    checks.push((name.clone(), i < elems.len() as u64));
                    elems.get(i as usize).copied().unwrap_or(0)
                }
            },
            IrExprKind::Param { param, index } => match (&self.args[*param], index) {
                (ConcreteArg::Scalar(v), None) => *v & ones(w),
                (ConcreteArg::Array(elems), Some(ix)) => {
                    let elems = elems.clone();
                    let i = self.expr(ix, checks);
                    checks.push((self.h.params[*param].name.clone(), i < elems.len() as u64));
                    elems.get(i as usize).map_or(0, |v| v & ones(w))
                }
                _ => 0,
            },
            IrExprKind::DmaRead { callsite, addr } => {
                let a = self.expr(addr, checks);
                let k = self.dma_occ[*callsite];
                self.dma_occ[*callsite] += 1;
                let v = self.dma.get(*callsite, k);
                self.effect("dma_read", vec![(addr.width, a), (64, v)]);
                v
            }
            IrExprKind::Unary(op, a) => {
                let a = self.expr(a, checks);
                match op {
                    UnOp::Not => !a & ones(w),
                    UnOp::Neg => 0u64.wrapping_sub(a) & ones(w),
                }
            }
            IrExprKind::Binary(op, a, b) => {
                let operand_w = a.width;
                let a = self.expr(a, checks);
                let b = self.expr(b, checks);
                binary(*op, operand_w, a, b)
            }
            IrExprKind::ZExt(a) => self.expr(a, checks),
            IrExprKind::Trunc(a) => self.expr(a, checks) & ones(w),
            IrExprKind::Ite(c, a, b) => {
                let c = self.expr(c, checks);
                let a = self.expr(a, checks);
                let b = self.expr(b, checks);
                if c == 1 {
                    a
                } else {
                    b
                }
            }
        }
    }
}
