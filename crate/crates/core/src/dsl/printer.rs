//! Canonical source rendering. Binary expressions are always
//! parenthesised, so the output reparses to the same tree.

use std::fmt::{self, Write};

use super::ast::*;

impl fmt::Display for DeviceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        print_model(self, &mut out);
        f.write_str(&out)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        expr(self, &mut out);
        f.write_str(&out)
    }
}

fn shape(len: Option<u32>) -> String {
    len.map(|n| format!("[{n}]")).unwrap_or_default()
}

fn print_model(m: &DeviceModel, out: &mut String) {
    writeln!(out, "model {} {{", m.name).unwrap();
    if let Some(v) = &m.version_tag {
        writeln!(out, "  version \"{v}\";").unwrap();
    }
    out.push_str("  state {\n");
    for f in &m.state_fields {
        writeln!(out, "    reg {}{} : u{};", f.name, shape(f.len), f.width).unwrap();
    }
    out.push_str("  }\n");
    for h in &m.handlers {
        let params: Vec<String> = h
            .params
            .iter()
            .map(|p| format!("{}{} : u{}", p.name, shape(p.len), p.width))
            .collect();
        write!(out, "  handler {}({})", h.name, params.join(", ")).unwrap();
        if let Some(w) = h.return_width {
            write!(out, " -> u{w}").unwrap();
        }
        out.push(' ');
        block(&h.body, 1, out);
        out.push('\n');
    }
    out.push_str("}\n");
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn block(b: &Block, level: usize, out: &mut String) {
    out.push_str("{\n");
    for s in b {
        stmt(s, level + 1, out);
    }
    indent(level, out);
    out.push('}');
}

fn stmt(s: &Stmt, level: usize, out: &mut String) {
    indent(level, out);
    match &s.kind {
        StmtKind::Local { name, width, init } => {
            write!(out, "local {name} : u{width}").unwrap();
            if let Some(e) = init {
                out.push_str(" = ");
                expr(e, out);
            }
            out.push(';');
        }
        StmtKind::Assign { target, value } => {
            out.push_str(&target.name);
            if let Some(i) = &target.index {
                out.push('[');
                expr(i, out);
                out.push(']');
            }
            out.push_str(" = ");
            expr(value, out);
            out.push(';');
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            out.push_str("if (");
            expr(cond, out);
            out.push_str(") ");
            block(then_block, level, out);
            if let Some(e) = else_block {
                out.push_str(" else ");
                block(e, level, out);
            }
        }
        StmtKind::While { cond, body, attr } => {
            match attr {
                LoopAttr::Default => {}
                LoopAttr::Elide => out.push_str("@elide "),
                LoopAttr::Unroll(n) => write!(out, "@unroll({n}) ").unwrap(),
            }
            out.push_str("while (");
            expr(cond, out);
            out.push_str(") ");
            block(body, level, out);
        }
        StmtKind::FireInterrupt(e) => call("fire_interrupt", &[e], out),
        StmtKind::DmaWrite(a, v) => call("dma_write", &[a, v], out),
        StmtKind::SendOutput(e) => call("send_output", &[e], out),
        StmtKind::Return(e) => {
            out.push_str("return ");
            expr(e, out);
            out.push(';');
        }
    }
    out.push('\n');
}

fn call(name: &str, args: &[&Expr], out: &mut String) {
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(a, out);
    }
    out.push_str(");");
}

fn expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Int(v) => {
            if *v < 10 {
                write!(out, "{v}").unwrap()
            } else {
                write!(out, "{v:#x}").unwrap()
            }
        }
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::TypedVar(n, w) => write!(out, "{n}:u{w}").unwrap(),
        ExprKind::Index(n, i) => {
            out.push_str(n);
            out.push('[');
            expr(i, out);
            out.push(']');
        }
        ExprKind::DmaRead(a) => {
            out.push_str("dma_read(");
            expr(a, out);
            out.push(')');
        }
        ExprKind::Unary(op, a) => {
            out.push(match op {
                UnaryOp::Not => '~',
                UnaryOp::Neg => '-',
            });
            expr(a, out);
        }
        ExprKind::Binary(op, a, b) => {
            out.push('(');
            expr(a, out);
            write!(out, " {} ", op.symbol()).unwrap();
            expr(b, out);
            out.push(')');
        }
        ExprKind::ZExt(w, a) | ExprKind::Trunc(w, a) => {
            let name = if matches!(e.kind, ExprKind::ZExt(..)) {
                "zext"
            } else {
                "trunc"
            };
            write!(out, "{name}<{w}>(").unwrap();
            expr(a, out);
            out.push(')');
        }
        ExprKind::Ite(c, a, b) => {
            out.push_str("ite(");
            expr(c, out);
            out.push_str(", ");
            expr(a, out);
            out.push_str(", ");
            expr(b, out);
            out.push(')');
        }
    }
}
