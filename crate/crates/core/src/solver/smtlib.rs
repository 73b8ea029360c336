//! QF_BV script emission.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use crate::term::{BinOp, PathCondition, Term, TermKind, UnOp};

/// Renders `pc` as a self-contained QF_BV script ending in
/// `(check-sat)` and `(get-model)`. Output is a pure function of the
/// condition's structure.
pub fn to_smtlib(pc: &PathCondition) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_BV)\n");
    for (name, width) in pc.free_vars() {
        writeln!(out, "(declare-const {} (_ BitVec {width}))", symbol(&name)).unwrap();
    }
    if pc.is_false() {
        out.push_str("(assert false)\n");
    } else {
        let mut emitter = Emitter::new(pc.conjuncts());
        let asserts: Vec<String> = pc.conjuncts().iter().map(|c| emitter.boolean(c)).collect();
        out.push_str(&emitter.defs);
        for a in asserts {
            writeln!(out, "(assert {a})").unwrap();
        }
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

pub(super) fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn literal(width: u32, value: u64) -> String {
    if width.is_multiple_of(4) {
        format!("#x{:0>digits$x}", value, digits = (width / 4) as usize)
    } else {
        format!("#b{:0>digits$b}", value, digits = width as usize)
    }
}

/// Shared non-leaf subterms are bound once with `define-fun` so that DAG
/// sharing does not blow up the script.
struct Emitter {
    shared: HashSet<u64>,
    names: HashMap<u64, String>,
    defs: String,
}

impl Emitter {
    fn new(roots: &[Term]) -> Self {
        let mut refs: HashMap<u64, usize> = HashMap::new();
        let mut stack: Vec<&Term> = roots.iter().collect();
        while let Some(t) = stack.pop() {
            let n = refs.entry(t.id()).or_insert(0);
            *n += 1;
            if *n > 1 {
                continue;
            }
            match t.kind() {
                TermKind::Const(_) | TermKind::Var(_) => {}
                TermKind::Unary(_, a) | TermKind::ZExt(a) | TermKind::Trunc(a) => stack.push(a),
                TermKind::Binary(_, a, b) => stack.extend([a, b]),
                TermKind::Ite(c, a, b) => stack.extend([c, a, b]),
            }
        }
        let shared = refs.into_iter().filter(|&(_, n)| n > 1).map(|(id, _)| id).collect();
        Emitter {
            shared,
            names: HashMap::new(),
            defs: String::new(),
        }
    }

    /// Bitvector-sorted rendering.
    fn bv(&mut self, t: &Term) -> String {
        if let Some(name) = self.names.get(&t.id()) {
            return name.clone();
        }
        let text = match t.kind() {
            TermKind::Const(v) => return literal(t.width(), *v),
            TermKind::Var(name) => return symbol(name),
            TermKind::Unary(op, a) => {
                let f = match op {
                    UnOp::Not => "bvnot",
                    UnOp::Neg => "bvneg",
                };
                format!("({f} {})", self.bv(a))
            }
            TermKind::Binary(op, a, b) if op.is_predicate() => {
                format!("(ite {} #b1 #b0)", self.predicate(*op, a, b))
            }
            TermKind::Binary(op, a, b) => {
                let f = match op {
                    BinOp::Add => "bvadd",
                    BinOp::Sub => "bvsub",
                    BinOp::Mul => "bvmul",
                    BinOp::And => "bvand",
                    BinOp::Or => "bvor",
                    BinOp::Xor => "bvxor",
                    BinOp::Shl => "bvshl",
                    BinOp::Lshr => "bvlshr",
                    BinOp::Eq | BinOp::Ult | BinOp::Ule => unreachable!(),
                };
                let (a, b) = (self.bv(a), self.bv(b));
                format!("({f} {a} {b})")
            }
            TermKind::ZExt(a) => {
                format!("((_ zero_extend {}) {})", t.width() - a.width(), self.bv(a))
            }
            TermKind::Trunc(a) => format!("((_ extract {} 0) {})", t.width() - 1, self.bv(a)),
            TermKind::Ite(c, a, b) => {
                let c = self.boolean(c);
                let (a, b) = (self.bv(a), self.bv(b));
                format!("(ite {c} {a} {b})")
            }
        };
        if self.shared.contains(&t.id()) {
            let name = format!("__t{}", self.names.len());
            writeln!(self.defs, "(define-fun {name} () (_ BitVec {}) {text})", t.width()).unwrap();
            self.names.insert(t.id(), name.clone());
            name
        } else {
            text
        }
    }

    fn predicate(&mut self, op: BinOp, a: &Term, b: &Term) -> String {
        let f = match op {
            BinOp::Eq => "=",
            BinOp::Ult => "bvult",
            BinOp::Ule => "bvule",
            _ => unreachable!(),
        };
        let (a, b) = (self.bv(a), self.bv(b));
        format!("({f} {a} {b})")
    }

    /// Bool-sorted rendering of a width-1 term.
    fn boolean(&mut self, t: &Term) -> String {
        match t.kind() {
            TermKind::Const(v) => (if *v == 1 { "true" } else { "false" }).to_string(),
            TermKind::Binary(op, a, b) if op.is_predicate() => self.predicate(*op, a, b),
            TermKind::Unary(UnOp::Not, a) => format!("(not {})", self.boolean(a)),
            _ => format!("(= {} #b1)", self.bv(t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::*;

    #[test]
    fn transliterates_equality() {
        let x = mk_var("x8", 8);
        let pc = PathCondition::new().and(&mk_eq(&x, &mk_const(8, 3)));
        let s = to_smtlib(&pc);
        assert!(s.contains("(declare-const x8 (_ BitVec 8))"), "{s}");
        assert!(s.contains("(assert (= x8 #x03))"), "{s}");
        assert!(s.contains("(check-sat)"));
    }

    #[test]
    fn true_and_false() {
        let t = to_smtlib(&PathCondition::new());
        assert!(!t.contains("(assert"));
        assert!(t.contains("(check-sat)"));
        let f = to_smtlib(&PathCondition::falsum());
        assert!(f.contains("(assert false)"));
    }

    #[test]
    fn odd_widths_use_binary_literals_and_quoting() {
        let b = mk_var("9lives", 1);
        let pc = PathCondition::new().and(&mk_eq(&mk_ite(&b, &mk_const(8, 1), &mk_const(8, 2)), &mk_const(8, 2)));
        let s = to_smtlib(&pc);
        assert!(s.contains("(declare-const |9lives| (_ BitVec 1))"), "{s}");
        assert!(s.contains("(= |9lives| #b1)"), "{s}");
    }

    #[test]
    fn shared_subterms_are_defined_once() {
        let x = mk_var("x", 16);
        let s1 = mk_mul(&x, &x);
        let s2 = mk_add(&s1, &s1);
        let pc = PathCondition::new().and(&mk_ult(&s2, &mk_const(16, 9)));
        let s = to_smtlib(&pc);
        assert_eq!(s.matches("bvmul").count(), 1, "{s}");
        assert!(s.contains("(define-fun __t0 () (_ BitVec 16) (bvmul x x))"), "{s}");
        assert_eq!(s, to_smtlib(&pc));
    }
}
