//! Depth-first symbolic exploration, then-branch first.
//!
//! Each live path owns its state. A fork pushes the else-side onto a work
//! stack and keeps running the then-side, which gives DFS order without
//! recursion. Paths that end at a fork (out-of-range index, exhausted loop
//! bound) are emitted on the spot.

use crate::dsl::ast::LoopAttr;
use crate::dsl::ir::{HandlerIr, IrExpr, IrExprKind, IrStmt, Place};
use crate::dsl::ValidatedModel;
use crate::solver::{SolveResult, Solver};
use crate::term::{self, eval, mask, Assignment, PathCondition, Term};

use super::*;

/// Runs handlers of one model under a fixed budget and solver.
pub struct Explorer<'a> {
    pub model: &'a ValidatedModel,
    pub budget: ExploreBudget,
    pub solver: &'a Solver,
}

pub fn run_handler(
    m: &ValidatedModel,
    h: &str,
    env: &SymbolicEnv,
    args: &[Arg],
    budget: ExploreBudget,
    solver: &Solver,
) -> Result<Exploration, InterpError> {
    run_guided(m, h, env, args, &PathCondition::new(), budget, solver)
}

pub fn run_guided(
    m: &ValidatedModel,
    h: &str,
    env: &SymbolicEnv,
    args: &[Arg],
    guide: &PathCondition,
    budget: ExploreBudget,
    solver: &Solver,
) -> Result<Exploration, InterpError> {
    Explorer {
        model: m,
        budget,
        solver,
    }
    .explore(h, env, args, guide, &PathCondition::new())
}

impl Explorer<'_> {
    /// Explores handler `h`. Feasibility is decided against
    /// `guide ∧ assume ∧ pc`; summaries carry `assume ∧ pc`.
    pub fn explore(
        &self,
        h: &str,
        env: &SymbolicEnv,
        args: &[Arg],
        guide: &PathCondition,
        assume: &PathCondition,
    ) -> Result<Exploration, InterpError> {
        let handler = self
            .model
            .handler(h)
            .ok_or_else(|| InterpError::UnknownHandler(h.to_string()))?;
        check_args(handler, args)?;
        if !env.matches(self.model.fields()) {
            return Err(InterpError::EnvMismatch(self.model.name().to_string()));
        }
        let mut run = Run {
            handler,
            args,
            guide,
            budget: self.budget,
            solver: self.solver,
            out: Vec::new(),
            stack: Vec::new(),
            truncated: false,
            stopped: false,
        };
        let start = guide.and_all(assume);
        let (witness, unknown) = match self.solver.solve(&start) {
            SolveResult::Unsat => return Ok(Exploration::default()),
            SolveResult::Sat(w) => (Some(w), false),
            SolveResult::Unknown(_) => (None, true),
        };
        let root = Path {
            state: env.clone(),
            locals: handler.locals.iter().map(|l| term::mk_const(l.width, 0)).collect(),
            pc: assume.clone(),
            witness,
            unknown,
            effects: Vec::new(),
            dma_occ: vec![0; handler.dma_callsites],
            frames: vec![Frame::Block(&handler.body, 0)],
            steps: 0,
            ret: None,
        };
        run.stack.push(root);
        while let Some(p) = run.stack.pop() {
            if run.stopped {
                run.truncated = true;
                break;
            }
            run.drive(p);
        }
        Ok(Exploration {
            summaries: run.out,
            truncated: run.truncated,
        })
    }
}

#[derive(Clone)]
enum Frame<'a> {
    Block(&'a [IrStmt], usize),
    Loop {
        cond: &'a IrExpr,
        body: &'a [IrStmt],
        iter: u32,
        bound: u32,
    },
}

#[derive(Clone)]
struct Path<'a> {
    state: SymbolicEnv,
    locals: Vec<Term>,
    pc: PathCondition,
    /// Satisfies `guide ∧ pc`, with absent variables read as zero.
    witness: Option<Assignment>,
    unknown: bool,
    effects: Vec<EffectEvent>,
    dma_occ: Vec<u32>,
    frames: Vec<Frame<'a>>,
    steps: usize,
    ret: Option<Term>,
}

struct Check {
    label: String,
    in_bounds: Term,
}

enum Feasible {
    Yes(Option<Assignment>, bool),
    No,
}

struct Run<'a, 'r> {
    handler: &'a HandlerIr,
    args: &'r [Arg],
    guide: &'r PathCondition,
    budget: ExploreBudget,
    solver: &'r Solver,
    out: Vec<PathSummary>,
    stack: Vec<Path<'a>>,
    truncated: bool,
    stopped: bool,
}

fn extended(w: &Assignment, t: &Term) -> Assignment {
    let mut w = w.clone();
    for (name, _) in t.free_vars() {
        if w.get(&name).is_none() {
            w.set(name, 0);
        }
    }
    w
}

impl<'a> Run<'a, '_> {
    fn feasible(&self, p: &Path, c: &Term) -> Feasible {
        if c.is_false() {
            return Feasible::No;
        }
        if c.is_true() {
            return Feasible::Yes(p.witness.clone(), false);
        }
        if let Some(w) = &p.witness {
            let w = extended(w, c);
            if eval(c, &w) == Ok(1) {
                return Feasible::Yes(Some(w), false);
            }
        }
        let query = self.guide.and_all(&p.pc).and(c);
        match self.solver.solve(&query) {
            SolveResult::Sat(w) => Feasible::Yes(Some(w), false),
            SolveResult::Unsat => Feasible::No,
            SolveResult::Unknown(_) => Feasible::Yes(None, true),
        }
    }

    /// Splits `p` on `c`; returns the sides on which `c` holds and fails.
    fn split(&self, p: Path<'a>, c: &Term) -> (Option<Path<'a>>, Option<Path<'a>>) {
        let not_c = term::mk_not(c);
        let yes = self.feasible(&p, c);
        let no = self.feasible(&p, &not_c);
        let refine = |mut q: Path<'a>, cond: &Term, f: Feasible| match f {
            Feasible::No => None,
            Feasible::Yes(w, unknown) => {
                q.pc.push(cond.clone());
                q.witness = w;
                q.unknown |= unknown;
                Some(q)
            }
        };
        match (&yes, &no) {
            (Feasible::No, _) => (None, refine(p, &not_c, no)),
            (_, Feasible::No) => (refine(p, c, yes), None),
            _ => {
                let q = p.clone();
                (refine(p, c, yes), refine(q, &not_c, no))
            }
        }
    }

    fn emit(&mut self, p: Path<'a>, status: PathStatus) {
        if self.out.len() >= self.budget.max_paths {
            self.stopped = true;
            self.truncated = true;
            return;
        }
        let return_term = match (&status, self.handler.return_width) {
            (PathStatus::Complete, Some(w)) => Some(p.ret.unwrap_or_else(|| term::mk_const(w, 0))),
            _ => None,
        };
        self.out.push(PathSummary {
            path_id: self.out.len(),
            pc: p.pc,
            final_state: p.state,
            return_term,
            effects: p.effects,
            status,
            unknown: p.unknown,
        });
    }

    /// Applies bounds checks in order, emitting an error path for each one
    /// that can fail. Returns the path on which all of them hold.
    fn bounds(&mut self, mut p: Path<'a>, checks: Vec<Check>) -> Option<Path<'a>> {
        for ch in checks {
            if ch.in_bounds.is_true() {
                continue;
            }
            let (ok, bad) = self.split(p, &ch.in_bounds);
            if let Some(b) = bad {
                self.emit(b, PathStatus::OutOfBounds { field: ch.label });
            }
            p = ok?;
        }
        Some(p)
    }

    fn drive(&mut self, mut p: Path<'a>) {
        loop {
            if self.stopped {
                self.truncated = true;
                return;
            }
            let Some(frame) = p.frames.last_mut() else {
                self.emit(p, PathStatus::Complete);
                return;
            };
            p.steps += 1;
            if p.steps > self.budget.max_steps_per_path {
                self.truncated = true;
                return;
            }
            let next = match frame {
                Frame::Block(body, at) => {
                    let body: &'a [IrStmt] = body;
                    if *at == body.len() {
                        p.frames.pop();
                        Some(p)
                    } else {
                        let s = &body[*at];
                        *at += 1;
                        self.stmt(p, s)
                    }
                }
                Frame::Loop {
                    cond,
                    body,
                    iter,
                    bound,
                } => {
                    let (cond, body, iter, bound) = (*cond, *body, *iter, *bound);
                    let mut checks = Vec::new();
                    let c = self.expr(&mut p, cond, &mut checks);
                    match self.bounds(p, checks) {
                        None => None,
                        Some(p) if iter >= bound => self.loop_bound(p, &c, true),
                        Some(p) => {
                            let (yes, no) = self.split(p, &c);
                            if let Some(mut n) = no {
                                n.frames.pop();
                                self.stack.push(n);
                            }
                            yes.map(|mut y| {
                                if let Some(Frame::Loop { iter, .. }) = y.frames.last_mut() {
                                    *iter += 1;
                                }
                                y.frames.push(Frame::Block(body, 0));
                                y
                            })
                        }
                    }
                }
            };
            match next {
                Some(q) => p = q,
                None => match self.stack.pop() {
                    Some(q) => p = q,
                    None => return,
                },
            }
        }
    }

    /// End of an unrolled loop: inputs that would iterate again stop here.
    fn loop_bound(&mut self, p: Path<'a>, c: &Term, pop_frame: bool) -> Option<Path<'a>> {
        let (again, done) = self.split(p, c);
        if let Some(a) = again {
            self.emit(a, PathStatus::BoundExhausted);
        }
        done.map(|mut d| {
            if pop_frame {
                d.frames.pop();
            }
            d
        })
    }

    fn stmt(&mut self, mut p: Path<'a>, s: &'a IrStmt) -> Option<Path<'a>> {
        let mut checks = Vec::new();
        match s {
            IrStmt::Assign { place, value } => {
                let idx = match place {
                    Place::Field { field, index: Some(ix) } => {
                        let i = self.expr(&mut p, ix, &mut checks);
                        let f = &p.state.fields()[*field];
                        checks.push(Check {
                            label: f.name.clone(),
                            in_bounds: in_bounds(&i, f.elems.len() as u32),
                        });
                        Some(i)
                    }
                    _ => None,
                };
                let v = self.expr(&mut p, value, &mut checks);
                let mut p = self.bounds(p, checks)?;
                match place {
                    Place::Local(l) => p.locals[*l] = v,
                    Place::Field { field, .. } => {
                        let elems = p.state.elems_mut(*field);
                        match idx {
                            None => elems[0] = v,
                            Some(i) => write_elem(elems, &i, &v),
                        }
                    }
                }
                Some(p)
            }
            IrStmt::If {
                cond,
                then_body,
                else_body,
            } => {
                let c = self.expr(&mut p, cond, &mut checks);
                let p = self.bounds(p, checks)?;
                let (yes, no) = self.split(p, &c);
                if let Some(mut n) = no {
                    n.frames.push(Frame::Block(else_body, 0));
                    self.stack.push(n);
                }
                yes.map(|mut y| {
                    y.frames.push(Frame::Block(then_body, 0));
                    y
                })
            }
            IrStmt::While { cond, body, attr } => {
                let bound = match attr {
                    LoopAttr::Elide => return Some(p),
                    LoopAttr::Unroll(n) => *n,
                    LoopAttr::Default => self.budget.loop_bound,
                };
                p.frames.push(Frame::Loop {
                    cond,
                    body,
                    iter: 0,
                    bound,
                });
                Some(p)
            }
            IrStmt::LoopBound { cond } => {
                let c = self.expr(&mut p, cond, &mut checks);
                let p = self.bounds(p, checks)?;
                self.loop_bound(p, &c, false)
            }
            IrStmt::FireInterrupt(e) => {
                let line = self.expr(&mut p, e, &mut checks);
                let p = self.bounds(p, checks)?;
                Some(push_effect(p, EffectKind::Interrupt { line }))
            }
            IrStmt::SendOutput(e) => {
                let value = self.expr(&mut p, e, &mut checks);
                let p = self.bounds(p, checks)?;
                Some(push_effect(p, EffectKind::Output { value }))
            }
            IrStmt::DmaWrite(a, v) => {
                let addr = self.expr(&mut p, a, &mut checks);
                let value = self.expr(&mut p, v, &mut checks);
                let p = self.bounds(p, checks)?;
                Some(push_effect(p, EffectKind::DmaWrite { addr, value }))
            }
            IrStmt::Return(e) => {
                let v = self.expr(&mut p, e, &mut checks);
                let mut p = self.bounds(p, checks)?;
                p.ret = Some(v);
                p.frames.clear();
                Some(p)
            }
        }
    }

    fn expr(&mut self, p: &mut Path<'a>, e: &IrExpr, checks: &mut Vec<Check>) -> Term {
        match &e.kind {
            IrExprKind::Const(v) => term::mk_const(e.width, *v),
            IrExprKind::Local(l) => p.locals[*l].clone(),
            IrExprKind::Field { field, index } => match index {
                None => p.state.elems(*field)[0].clone(),
                Some(ix) => {
                    let i = self.expr(p, ix, checks);
                    let label = p.state.fields()[*field].name.clone();
                    let elems = p.state.elems(*field);
                    checks.push(Check {
                        label,
                        in_bounds: in_bounds(&i, elems.len() as u32),
                    });
                    read_elem(elems, &i)
                }
            },
            IrExprKind::Param { param, index } => match (&self.args[*param], index) {
                (Arg::Scalar(t), None) => t.clone(),
                (Arg::Array(elems), Some(ix)) => {
                    let i = self.expr(p, ix, checks);
                    checks.push(Check {
                        label: self.handler.params[*param].name.clone(),
                        in_bounds: in_bounds(&i, elems.len() as u32),
                    });
                    read_elem(elems, &i)
                }
                _ => unreachable!("argument shapes are checked before exploration"),
            },
            IrExprKind::DmaRead { callsite, addr } => {
                let addr = self.expr(p, addr, checks);
                let occurrence = p.dma_occ[*callsite];
                p.dma_occ[*callsite] += 1;
                let name = VarOrigin::DmaFetch {
                    handler: self.handler.name.clone(),
                    callsite: *callsite,
                    occurrence,
                }
                .var_name();
                let result = term::mk_var(&name, DMA_WIDTH);
                let seq = p.effects.len();
                p.effects.push(EffectEvent {
                    seq,
                    kind: EffectKind::DmaRead {
                        addr,
                        result: result.clone(),
                    },
                });
                result
            }
            IrExprKind::Unary(op, a) => {
                let a = self.expr(p, a, checks);
                term::mk_unary(*op, &a)
            }
            IrExprKind::Binary(op, a, b) => {
                let a = self.expr(p, a, checks);
                let b = self.expr(p, b, checks);
                term::mk_binary(*op, &a, &b)
            }
            IrExprKind::ZExt(a) => {
                let a = self.expr(p, a, checks);
                term::mk_zext(&a, e.width)
            }
            IrExprKind::Trunc(a) => {
                let a = self.expr(p, a, checks);
                term::mk_trunc(&a, e.width)
            }
            IrExprKind::Ite(c, a, b) => {
                let c = self.expr(p, c, checks);
                let a = self.expr(p, a, checks);
                let b = self.expr(p, b, checks);
                term::mk_ite(&c, &a, &b)
            }
        }
    }
}

fn push_effect<'a>(mut p: Path<'a>, kind: EffectKind) -> Path<'a> {
    let seq = p.effects.len();
    p.effects.push(EffectEvent { seq, kind });
    p
}

fn in_bounds(i: &Term, len: u32) -> Term {
    if len as u64 > mask(i.width()) {
        term::mk_true()
    } else {
        term::mk_ult(i, &term::mk_const(i.width(), len as u64))
    }
}

/// Element `i` of `elems`; out-of-range indices read the last element,
/// which only matters on paths that stop with an index error.
fn read_elem(elems: &[Term], i: &Term) -> Term {
    if let Some(k) = i.as_const() {
        return elems[(k as usize).min(elems.len() - 1)].clone();
    }
    let last = elems.len() - 1;
    let mut acc = elems[last].clone();
    for j in (0..last).rev() {
        if j as u64 > mask(i.width()) {
            continue;
        }
        let hit = term::mk_eq(i, &term::mk_const(i.width(), j as u64));
        acc = term::mk_ite(&hit, &elems[j], &acc);
    }
    acc
}

fn write_elem(elems: &mut [Term], i: &Term, v: &Term) {
    if let Some(k) = i.as_const() {
        if let Some(slot) = elems.get_mut(k as usize) {
            *slot = v.clone();
        }
        return;
    }
    for (j, slot) in elems.iter_mut().enumerate() {
        if j as u64 > mask(i.width()) {
            break;
        }
        let hit = term::mk_eq(i, &term::mk_const(i.width(), j as u64));
        *slot = term::mk_ite(&hit, v, slot);
    }
}
