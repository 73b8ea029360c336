//! Loop removal: `@elide` loops are dropped after a safety check, every
//! other loop is unrolled into a nested `if` chain that ends in a
//! [`IrStmt::LoopBound`] marker.

use super::ast::{LoopAttr, Pos};
use super::ir::{walk_stmts, HandlerIr, IrExpr, IrStmt, Place};
use super::validate::{Rule, ValidatedModel, ValidationError};

pub fn elide_loops(m: &ValidatedModel, default_bound: u32) -> Result<ValidatedModel, ValidationError> {
    assert!(default_bound >= 1, "loop bound must be positive");
    let mut handlers = Vec::with_capacity(m.handlers().len());
    for h in m.handlers() {
        let body = rewrite(m, h, &h.body, default_bound)?;
        handlers.push(HandlerIr { body, ..h.clone() });
    }
    Ok(m.with_handlers(handlers))
}

fn rewrite(m: &ValidatedModel, h: &HandlerIr, body: &[IrStmt], bound: u32) -> Result<Vec<IrStmt>, ValidationError> {
    let mut out = Vec::with_capacity(body.len());
    for s in body {
        match s {
            IrStmt::While { cond, body, attr } => match attr {
                LoopAttr::Elide => {
                    if let Some(field) = first_state_write(body) {
                        return Err(ValidationError {
                            pos: loop_pos(m, &h.name).unwrap_or_default(),
                            context: h.name.clone(),
                            rule: Rule::ElidedLoopWritesState(m.fields()[field].name.clone()),
                        });
                    }
                }
                LoopAttr::Unroll(n) => {
                    let inner = rewrite(m, h, body, bound)?;
                    out.extend(unroll(cond, &inner, *n));
                }
                LoopAttr::Default => {
                    let inner = rewrite(m, h, body, bound)?;
                    out.extend(unroll(cond, &inner, bound));
                }
            },
            IrStmt::If {
                cond,
                then_body,
                else_body,
            } => out.push(IrStmt::If {
                cond: cond.clone(),
                then_body: rewrite(m, h, then_body, bound)?,
                else_body: rewrite(m, h, else_body, bound)?,
            }),
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

fn unroll(cond: &IrExpr, body: &[IrStmt], depth: u32) -> Vec<IrStmt> {
    if depth == 0 {
        return vec![IrStmt::LoopBound { cond: cond.clone() }];
    }
    let mut then_body = body.to_vec();
    then_body.extend(unroll(cond, body, depth - 1));
    vec![IrStmt::If {
        cond: cond.clone(),
        then_body,
        else_body: Vec::new(),
    }]
}

fn first_state_write(body: &[IrStmt]) -> Option<usize> {
    let mut found = None;
    walk_stmts(
        body,
        &mut |s| {
            if let IrStmt::Assign {
                place: Place::Field { field, .. },
                ..
            } = s
            {
                found.get_or_insert(*field);
            }
        },
        &mut |_| {},
    );
    found
}

/// Source position of the first `@elide` loop in the named handler.
fn loop_pos(m: &ValidatedModel, handler: &str) -> Option<Pos> {
    use super::ast::{Stmt, StmtKind};
    fn find(b: &[Stmt]) -> Option<Pos> {
        for s in b {
            match &s.kind {
                StmtKind::While {
                    attr: LoopAttr::Elide, ..
                } => return Some(s.pos),
                StmtKind::While { body, .. } => {
                    if let Some(p) = find(body) {
                        return Some(p);
                    }
                }
                StmtKind::If {
                    then_block, else_block, ..
                } => {
                    if let Some(p) = find(then_block).or_else(|| else_block.as_deref().and_then(find)) {
                        return Some(p);
                    }
                }
                _ => {}
            }
        }
        None
    }
    find(&m.ast().handler(handler)?.body)
}
