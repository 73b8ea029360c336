//! Random well-typed term trees and a reference semantics for them.
//!
//! `RefExpr` is an unsimplified tree. `RefExpr::value` evaluates it on
//! `u128` with its own operator definitions, sharing nothing with
//! [`crate::term::ops`]; `RefExpr::build` goes through the simplifying
//! constructors. Agreement of the two is the simplifier's soundness.

use proptest::prelude::*;
use proptest::sample::select;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use crate::term::{self, Assignment, BinOp, PathCondition, Term};

pub const WIDTHS: [u32; 5] = [1, 8, 16, 32, 64];

/// Variables a generator may use, with widths.
pub type Vocab = &'static [(&'static str, u32)];

pub const FULL: Vocab = &[
    ("a1", 1),
    ("b1", 1),
    ("c1", 1),
    ("a8", 8),
    ("b8", 8),
    ("c8", 8),
    ("a16", 16),
    ("b16", 16),
    ("c16", 16),
    ("a32", 32),
    ("b32", 32),
    ("c32", 32),
    ("a64", 64),
    ("b64", 64),
    ("c64", 64),
];

/// Two byte variables: at most 16 free bits.
pub const SMALL: Vocab = &[("a8", 8), ("b8", 8)];

#[derive(Clone, Debug)]
pub enum RefExpr {
    Var(&'static str, u32),
    Const(u32, u64),
    Not(Box<RefExpr>),
    Neg(Box<RefExpr>),
    Bin(BinOp, Box<RefExpr>, Box<RefExpr>),
    Zext(Box<RefExpr>, u32),
    Trunc(Box<RefExpr>, u32),
    Ite(Box<RefExpr>, Box<RefExpr>, Box<RefExpr>),
}

fn ones(w: u32) -> u128 {
    (1u128 << w) - 1
}

impl RefExpr {
    pub fn width(&self) -> u32 {
        match self {
            RefExpr::Var(_, w) | RefExpr::Const(w, _) | RefExpr::Zext(_, w) | RefExpr::Trunc(_, w) => *w,
            RefExpr::Not(a) | RefExpr::Neg(a) => a.width(),
            RefExpr::Bin(op, a, _) => {
                if op.is_predicate() {
                    1
                } else {
                    a.width()
                }
            }
            RefExpr::Ite(_, a, _) => a.width(),
        }
    }

    pub fn build(&self) -> Term {
        match self {
            RefExpr::Var(n, w) => term::mk_var(n, *w),
            RefExpr::Const(w, c) => term::mk_const(*w, *c),
            RefExpr::Not(a) => term::mk_not(&a.build()),
            RefExpr::Neg(a) => term::mk_neg(&a.build()),
            RefExpr::Bin(op, a, b) => term::mk_binary(*op, &a.build(), &b.build()),
            RefExpr::Zext(a, w) => term::mk_zext(&a.build(), *w),
            RefExpr::Trunc(a, w) => term::mk_trunc(&a.build(), *w),
            RefExpr::Ite(c, a, b) => term::mk_ite(&c.build(), &a.build(), &b.build()),
        }
    }

    pub fn value(&self, a: &Assignment) -> u128 {
        match self {
            RefExpr::Var(n, w) => a.value_or_zero(n) as u128 & ones(*w),
            RefExpr::Const(_, c) => *c as u128,
            RefExpr::Not(x) => ones(x.width()) ^ x.value(a),
            RefExpr::Neg(x) => ((1u128 << x.width()) - x.value(a)) & ones(x.width()),
            RefExpr::Bin(op, x, y) => {
                let w = x.width();
                let (p, q) = (x.value(a), y.value(a));
                let m = ones(w);
                match op {
                    BinOp::Add => (p + q) & m,
                    BinOp::Sub => (p + (1u128 << w) - q) & m,
                    BinOp::Mul => (p * q) & m,
                    BinOp::And => p & q,
                    BinOp::Or => p | q,
                    BinOp::Xor => p ^ q,
                    BinOp::Shl if q < w as u128 => (p << q) & m,
                    BinOp::Lshr if q < w as u128 => p >> q,
                    BinOp::Shl | BinOp::Lshr => 0,
                    BinOp::Eq => (p == q) as u128,
                    BinOp::Ult => (p < q) as u128,
                    BinOp::Ule => (p <= q) as u128,
                }
            }
            RefExpr::Zext(x, _) => x.value(a),
            RefExpr::Trunc(x, w) => x.value(a) & ones(*w),
            RefExpr::Ite(c, x, y) => {
                if c.value(a) == 1 {
                    x.value(a)
                } else {
                    y.value(a)
                }
            }
        }
    }
}

/// Root operator of a generated tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Not,
    Neg,
    Bin(BinOp),
    Zext,
    Trunc,
    Ite,
}

impl Op {
    pub fn all() -> Vec<Op> {
        let mut v = vec![Op::Not, Op::Neg];
        v.extend(BinOp::ALL.iter().map(|b| Op::Bin(*b)));
        v.extend([Op::Zext, Op::Trunc, Op::Ite]);
        v
    }

    /// Result widths this operator can produce.
    fn widths(self) -> Vec<u32> {
        match self {
            Op::Bin(b) if b.is_predicate() => vec![1],
            Op::Zext => WIDTHS[1..].to_vec(),
            Op::Trunc => WIDTHS[..4].to_vec(),
            _ => WIDTHS.to_vec(),
        }
    }
}

fn leaf(vocab: Vocab, w: u32) -> BoxedStrategy<RefExpr> {
    let m = term::mask(w);
    let consts = prop_oneof![
        Just(0u64),
        Just(1 & m),
        Just(m),
        (0u64..=w as u64 + 1).prop_map(move |c| c & m),
        any::<u64>().prop_map(move |c| c & m),
    ]
    .prop_map(move |c| RefExpr::Const(w, c));
    let vars: Vec<&'static str> = vocab.iter().filter(|(_, vw)| *vw == w).map(|(n, _)| *n).collect();
    if vars.is_empty() {
        consts.boxed()
    } else {
        prop_oneof![3 => select(vars).prop_map(move |n| RefExpr::Var(n, w)), 1 => consts].boxed()
    }
}

/// A random tree of width `w` and depth at most `depth`.
pub fn arb_expr(vocab: Vocab, w: u32, depth: u32) -> BoxedStrategy<RefExpr> {
    if depth == 0 {
        return leaf(vocab, w);
    }
    let ops: Vec<Op> = Op::all().into_iter().filter(|op| op.widths().contains(&w)).collect();
    prop_oneof![
        2 => leaf(vocab, w),
        3 => select(ops).prop_flat_map(move |op| arb_rooted(vocab, op, w, depth)),
    ]
    .boxed()
}

fn pair(vocab: Vocab, w: u32, depth: u32) -> BoxedStrategy<(RefExpr, RefExpr)> {
    let sub = move || arb_expr(vocab, w, depth - 1);
    prop_oneof![
        3 => (sub(), sub()),
        1 => sub().prop_map(|e| (e.clone(), e)),
        1 => (arb_expr(vocab, 1, depth - 1), sub(), sub())
            .prop_map(|(c, x, y)| (RefExpr::Ite(Box::new(c), Box::new(x), Box::new(y.clone())), y)),
    ]
    .boxed()
}

/// A tree of width `w` whose root is `op`.
pub fn arb_rooted(vocab: Vocab, op: Op, w: u32, depth: u32) -> BoxedStrategy<RefExpr> {
    assert!(depth >= 1 && op.widths().contains(&w));
    let bx = Box::new;
    match op {
        Op::Not => arb_expr(vocab, w, depth - 1)
            .prop_map(move |a| RefExpr::Not(bx(a)))
            .boxed(),
        Op::Neg => arb_expr(vocab, w, depth - 1)
            .prop_map(move |a| RefExpr::Neg(bx(a)))
            .boxed(),
        Op::Bin(b) if b.is_predicate() => select(WIDTHS.to_vec())
            .prop_flat_map(move |ow| pair(vocab, ow, depth))
            .prop_map(move |(x, y)| RefExpr::Bin(b, bx(x), bx(y)))
            .boxed(),
        Op::Bin(b) => pair(vocab, w, depth)
            .prop_map(move |(x, y)| RefExpr::Bin(b, bx(x), bx(y)))
            .boxed(),
        Op::Zext => select(WIDTHS.iter().copied().filter(|&s| s < w).collect::<Vec<_>>())
            .prop_flat_map(move |s| arb_expr(vocab, s, depth - 1))
            .prop_map(move |a| RefExpr::Zext(bx(a), w))
            .boxed(),
        Op::Trunc => select(WIDTHS.iter().copied().filter(|&s| s > w).collect::<Vec<_>>())
            .prop_flat_map(move |s| arb_expr(vocab, s, depth - 1))
            .prop_map(move |a| RefExpr::Trunc(bx(a), w))
            .boxed(),
        Op::Ite => (arb_expr(vocab, 1, depth - 1), pair(vocab, w, depth))
            .prop_map(move |(c, (x, y))| RefExpr::Ite(bx(c), bx(x), bx(y)))
            .boxed(),
    }
}

/// Values for every variable in `vocab`, biased toward edge cases.
pub fn arb_assignment(vocab: Vocab) -> BoxedStrategy<Assignment> {
    let value = prop_oneof![Just(0u64), Just(u64::MAX), 0u64..8, any::<u64>(),];
    proptest::collection::vec(value, vocab.len())
        .prop_map(move |vals| {
            let mut a = Assignment::new();
            for ((n, w), v) in vocab.iter().zip(vals) {
                a.set(*n, v & term::mask(*w));
            }
            a
        })
        .boxed()
}

/// A tree rooted at `op` (of a random valid width) plus an assignment.
pub fn arb_case(op: Op) -> BoxedStrategy<(RefExpr, Assignment)> {
    (
        select(op.widths()).prop_flat_map(move |w| arb_rooted(FULL, op, w, 3)),
        arb_assignment(FULL),
    )
        .boxed()
}

/// Compares the simplified term against the reference value.
pub fn check_case(e: &RefExpr, a: &Assignment) -> Result<(), String> {
    let t = e.build();
    if t.width() != e.width() {
        return Err(format!("width {} != {} for {e:?}", t.width(), e.width()));
    }
    let got = term::eval(&t, a).map_err(|err| format!("{err} for {e:?}"))?;
    let want = e.value(a);
    if got as u128 != want {
        return Err(format!("{e:?} under {a}: simplified {t} gives {got}, reference {want}"));
    }
    Ok(())
}

/// Runs `cases` random cases rooted at `op`.
pub fn check_operator(op: Op, cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&arb_case(op), |(e, a)| check_case(&e, &a).map_err(TestCaseError::fail))
        .map_err(|e| e.to_string())
}

/// Random path conditions over [`SMALL`]: one to four predicate conjuncts.
pub fn arb_path_condition() -> BoxedStrategy<PathCondition> {
    let preds: Vec<Op> = BinOp::ALL
        .iter()
        .filter(|b| b.is_predicate())
        .map(|b| Op::Bin(*b))
        .collect();
    let conjunct = prop_oneof![
        3 => select(preds).prop_flat_map(|op| arb_rooted(SMALL, op, 1, 3)),
        1 => arb_expr(SMALL, 1, 3),
    ];
    proptest::collection::vec(conjunct, 1..=4)
        .prop_map(|cs| {
            let terms: Vec<Term> = cs.iter().map(RefExpr::build).collect();
            PathCondition::from_conjuncts(&terms)
        })
        .boxed()
}
