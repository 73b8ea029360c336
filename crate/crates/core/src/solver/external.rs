//! External SMT-LIB v2 solver over stdin/stdout.
//!
//! Every failure mode (spawn, I/O, timeout, unparsable output) becomes
//! `Unknown` with a reason; the caller never sees a panic or an error.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use super::smtlib::{symbol, to_smtlib};
use super::SolveResult;
use crate::term::{Assignment, PathCondition};

pub(super) fn solve(pc: &PathCondition, cmd: &str, timeout_ms: u64) -> SolveResult {
    match run(pc, cmd, timeout_ms) {
        Ok(r) => r,
        Err(reason) => SolveResult::Unknown(reason),
    }
}

fn run(pc: &PathCondition, cmd: &str, timeout_ms: u64) -> Result<SolveResult, String> {
    let mut parts = cmd.split_whitespace();
    let program = parts.next().ok_or("empty solver command")?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("spawn {program}: {e}"))?;

    let script = to_smtlib(pc);
    {
        let mut stdin = child.stdin.take().ok_or("solver stdin unavailable")?;
        stdin
            .write_all(script.as_bytes())
            .map_err(|e| format!("write to solver: {e}"))?;
    }

    let mut stdout = child.stdout.take().ok_or("solver stdout unavailable")?;
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut buf = String::new();
        let res = stdout.read_to_string(&mut buf).map(|_| buf);
        let _ = tx.send(res);
    });
    let output = match rx.recv_timeout(Duration::from_millis(timeout_ms)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(format!("read from solver: {e}"));
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err("timeout".into());
        }
    };
    let _ = child.wait();
    parse_response(pc, &output)
}

fn parse_response(pc: &PathCondition, output: &str) -> Result<SolveResult, String> {
    let mut sexps = parse_sexps(output)?.into_iter();
    match sexps.next() {
        Some(Sexp::Atom(a)) if a == "unsat" => Ok(SolveResult::Unsat),
        Some(Sexp::Atom(a)) if a == "unknown" => Ok(SolveResult::Unknown("solver".into())),
        Some(Sexp::Atom(a)) if a == "sat" => {
            let model = sexps.next().ok_or("sat without model")?;
            Ok(SolveResult::Sat(parse_model(pc, &model)?))
        }
        other => Err(format!("unexpected solver response {other:?}")),
    }
}

fn parse_model(pc: &PathCondition, model: &Sexp) -> Result<Assignment, String> {
    let names: Vec<(String, String)> = pc.free_vars().into_keys().map(|n| (symbol(&n), n)).collect();
    let mut out = Assignment::new();
    let Sexp::List(items) = model else {
        return Err("model is not a list".into());
    };
    for item in items {
        // Some solvers wrap the model as (model (define-fun ...) ...).
        let Sexp::List(def) = item else { continue };
        match def.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), _sort, value]
                if kw == "define-fun" && args.is_empty() =>
            {
                if let Some((_, orig)) = names.iter().find(|(sym, _)| sym == name) {
                    out.set(orig.clone(), parse_value(value)?);
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

fn parse_value(v: &Sexp) -> Result<u64, String> {
    match v {
        Sexp::Atom(a) if a.starts_with("#x") => {
            u64::from_str_radix(&a[2..], 16).map_err(|e| format!("bad value {a}: {e}"))
        }
        Sexp::Atom(a) if a.starts_with("#b") => {
            u64::from_str_radix(&a[2..], 2).map_err(|e| format!("bad value {a}: {e}"))
        }
        // (_ bvN W)
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(u), Sexp::Atom(bv), _] if u == "_" && bv.starts_with("bv") => {
                bv[2..].parse().map_err(|e| format!("bad value {bv}: {e}"))
            }
            _ => Err(format!("unsupported model value {v:?}")),
        },
        _ => Err(format!("unsupported model value {v:?}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let list = stack.pop().ok_or("unbalanced )")?;
                stack.last_mut().ok_or("unbalanced )")?.push(Sexp::List(list));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().unwrap().push(Sexp::Atom(format!("|{s}|")));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced (".into());
    }
    Ok(stack.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::*;

    #[test]
    fn parses_z3_style_model() {
        let x = mk_var("state.ctrl.0", 8);
        let y = mk_var("9y", 1);
        let pc = PathCondition::new().and(&mk_eq(&x, &mk_const(8, 0xff))).and(&y);
        let out = "sat\n(\n  (define-fun state.ctrl.0 () (_ BitVec 8)\n    #xff)\n  (define-fun |9y| () (_ BitVec 1) #b1)\n)\n";
        let r = parse_response(&pc, out).unwrap();
        let w = r.witness().unwrap();
        assert_eq!(w.get("state.ctrl.0"), Some(0xff));
        assert_eq!(w.get("9y"), Some(1));
    }

    #[test]
    fn parses_bv_literal_and_unsat() {
        let x = mk_var("x", 16);
        let pc = PathCondition::new().and(&mk_eq(&x, &mk_const(16, 300)));
        let r = parse_response(&pc, "sat\n(model (define-fun x () (_ BitVec 16) (_ bv300 16)))").unwrap();
        assert_eq!(r.witness().unwrap().get("x"), Some(300));
        assert_eq!(
            parse_response(&pc, "unsat\n(error \"no model\")").unwrap(),
            SolveResult::Unsat
        );
        assert!(parse_response(&pc, "garbage").is_err());
    }
}
