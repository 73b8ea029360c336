//! Hash-consed bitvector terms.
//!
//! Every [`Term`] is interned in a process-wide table, so two structurally
//! identical live terms are always the same allocation and `==` is a pointer
//! comparison. Constructors (`mk_*`) apply local peephole simplifications
//! before interning; they never canonicalize beyond that.
//!
//! Width-1 terms double as booleans.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, LazyLock, Mutex, Weak};

use thiserror::Error;

/// Widths accepted everywhere in the tool.
pub const WIDTHS: [u32; 5] = [1, 8, 16, 32, 64];

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Eq,
    Ult,
    Ule,
}

impl BinOp {
    pub const ALL: [BinOp; 11] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Lshr,
        BinOp::Eq,
        BinOp::Ult,
        BinOp::Ule,
    ];

    pub fn is_predicate(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ult | BinOp::Ule)
    }

    fn is_commutative(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Mul | BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Eq
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Shl => "<<",
            BinOp::Lshr => ">>",
            BinOp::Eq => "==",
            BinOp::Ult => "<",
            BinOp::Ule => "<=",
        }
    }
}

/// Concrete operator semantics shared by constant folding and [`eval`].
pub mod ops {
    use super::{mask, BinOp, UnOp};

    pub fn unary(op: UnOp, width: u32, a: u64) -> u64 {
        match op {
            UnOp::Not => !a & mask(width),
            UnOp::Neg => a.wrapping_neg() & mask(width),
        }
    }

    /// `width` is the operand width; predicates return 0 or 1.
    pub fn binary(op: BinOp, width: u32, a: u64, b: u64) -> u64 {
        let m = mask(width);
        match op {
            BinOp::Add => a.wrapping_add(b) & m,
            BinOp::Sub => a.wrapping_sub(b) & m,
            BinOp::Mul => a.wrapping_mul(b) & m,
            BinOp::And => a & b,
            BinOp::Or => a | b,
            BinOp::Xor => a ^ b,
            BinOp::Shl => {
                if b >= width as u64 {
                    0
                } else {
                    (a << b) & m
                }
            }
            BinOp::Lshr => {
                if b >= width as u64 {
                    0
                } else {
                    a >> b
                }
            }
            BinOp::Eq => (a == b) as u64,
            BinOp::Ult => (a < b) as u64,
            BinOp::Ule => (a <= b) as u64,
        }
    }
}

#[derive(Debug)]
pub enum TermKind {
    Const(u64),
    Var(Arc<str>),
    Unary(UnOp, Term),
    Binary(BinOp, Term, Term),
    /// Zero extension to the node's width.
    ZExt(Term),
    /// Truncation to the node's width.
    Trunc(Term),
    Ite(Term, Term, Term),
}

#[derive(Debug)]
struct TermData {
    id: u64,
    width: u32,
    kind: TermKind,
}

/// A shared, immutable, hash-consed term.
#[derive(Clone)]
pub struct Term(Arc<TermData>);

impl Term {
    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    /// Process-unique node id. Only meaningful for lookups, never for output.
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.kind() {
            TermKind::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.kind() {
            TermKind::Var(name) => Some(name),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.width() == 1 && self.as_const() == Some(1)
    }

    pub fn is_false(&self) -> bool {
        self.width() == 1 && self.as_const() == Some(0)
    }

    fn children(&self) -> Vec<&Term> {
        match self.kind() {
            TermKind::Const(_) | TermKind::Var(_) => vec![],
            TermKind::Unary(_, a) | TermKind::ZExt(a) | TermKind::Trunc(a) => vec![a],
            TermKind::Binary(_, a, b) => vec![a, b],
            TermKind::Ite(c, a, b) => vec![c, a, b],
        }
    }

    /// Free variables with their widths, ordered by name.
    ///
    /// Panics if one name is used at two different widths.
    pub fn free_vars(&self) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        collect_vars(std::iter::once(self), &mut out);
        out
    }
}

pub(crate) fn collect_vars<'a>(roots: impl IntoIterator<Item = &'a Term>, out: &mut BTreeMap<String, u32>) {
    let mut seen = std::collections::HashSet::new();
    let mut stack: Vec<&Term> = roots.into_iter().collect();
    while let Some(t) = stack.pop() {
        if !seen.insert(t.id()) {
            continue;
        }
        if let TermKind::Var(name) = t.kind() {
            match out.get(name.as_ref()) {
                Some(&w) if w != t.width() => {
                    panic!("variable {name} used at widths {w} and {}", t.width())
                }
                Some(_) => {}
                None => {
                    out.insert(name.to_string(), t.width());
                }
            }
        }
        stack.extend(t.children());
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            TermKind::Const(v) => {
                if self.width() == 1 {
                    write!(f, "{}", if *v == 1 { "true" } else { "false" })
                } else if *v < 10 {
                    write!(f, "{v}")
                } else {
                    write!(f, "{v:#x}")
                }
            }
            TermKind::Var(name) => write!(f, "{name}"),
            TermKind::Unary(UnOp::Not, a) => write!(f, "~{a}"),
            TermKind::Unary(UnOp::Neg, a) => write!(f, "-{a}"),
            TermKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            TermKind::ZExt(a) => write!(f, "zext<{}>({a})", self.width()),
            TermKind::Trunc(a) => write!(f, "trunc<{}>({a})", self.width()),
            TermKind::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Interning

#[derive(PartialEq, Eq, Hash)]
enum Key {
    Const(u32, u64),
    Var(u32, Arc<str>),
    Unary(UnOp, u64),
    Binary(BinOp, u64, u64),
    ZExt(u32, u64),
    Trunc(u32, u64),
    Ite(u64, u64, u64),
}

struct Interner {
    table: HashMap<Key, Weak<TermData>>,
    sweep_at: usize,
}

static INTERNER: LazyLock<Mutex<Interner>> = LazyLock::new(|| {
    Mutex::new(Interner {
        table: HashMap::new(),
        sweep_at: 4096,
    })
});

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn intern(key: Key, width: u32, kind: impl FnOnce() -> TermKind) -> Term {
    let mut guard = INTERNER.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(live) = guard.table.get(&key).and_then(Weak::upgrade) {
        return Term(live);
    }
    let data = Arc::new(TermData {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        width,
        kind: kind(),
    });
    guard.table.insert(key, Arc::downgrade(&data));
    if guard.table.len() > guard.sweep_at {
        guard.table.retain(|_, w| w.strong_count() > 0);
        guard.sweep_at = (guard.table.len() * 2).max(4096);
    }
    Term(data)
}

fn check_width(width: u32) {
    assert!((1..=64).contains(&width), "term width {width} outside 1..=64");
}

// ---------------------------------------------------------------------------
// Constructors

pub fn mk_const(width: u32, value: u64) -> Term {
    check_width(width);
    let value = value & mask(width);
    intern(Key::Const(width, value), width, || TermKind::Const(value))
}

pub fn mk_bool(b: bool) -> Term {
    mk_const(1, b as u64)
}

pub fn mk_true() -> Term {
    mk_bool(true)
}

pub fn mk_false() -> Term {
    mk_bool(false)
}

pub fn mk_var(name: &str, width: u32) -> Term {
    check_width(width);
    let name: Arc<str> = Arc::from(name);
    intern(Key::Var(width, name.clone()), width, || TermKind::Var(name))
}

fn raw_unary(op: UnOp, a: &Term) -> Term {
    intern(Key::Unary(op, a.id()), a.width(), || TermKind::Unary(op, a.clone()))
}

fn raw_binary(op: BinOp, a: &Term, b: &Term) -> Term {
    let width = if op.is_predicate() { 1 } else { a.width() };
    intern(Key::Binary(op, a.id(), b.id()), width, || {
        TermKind::Binary(op, a.clone(), b.clone())
    })
}

pub fn mk_unary(op: UnOp, a: &Term) -> Term {
    if let Some(v) = a.as_const() {
        return mk_const(a.width(), ops::unary(op, a.width(), v));
    }
    if let TermKind::Unary(inner, x) = a.kind() {
        if *inner == op {
            return x.clone();
        }
    }
    raw_unary(op, a)
}

pub fn mk_not(a: &Term) -> Term {
    mk_unary(UnOp::Not, a)
}

pub fn mk_neg(a: &Term) -> Term {
    mk_unary(UnOp::Neg, a)
}

pub fn mk_binary(op: BinOp, a: &Term, b: &Term) -> Term {
    assert_eq!(a.width(), b.width(), "width mismatch in {op:?}: {a} vs {b}");
    let width = a.width();
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        let res_width = if op.is_predicate() { 1 } else { width };
        return mk_const(res_width, ops::binary(op, width, x, y));
    }
    // Constants go to the right of commutative operators.
    let (a, b) = if op.is_commutative() && a.as_const().is_some() {
        (b, a)
    } else {
        (a, b)
    };
    let ones = mask(width);
    let zero = || mk_const(width, 0);
    match (op, b.as_const()) {
        (BinOp::Add | BinOp::Sub | BinOp::Or | BinOp::Xor, Some(0)) => return a.clone(),
        (BinOp::Shl | BinOp::Lshr, Some(0)) => return a.clone(),
        (BinOp::Shl | BinOp::Lshr, Some(s)) if s >= width as u64 => return zero(),
        (BinOp::Mul, Some(1)) => return a.clone(),
        (BinOp::Mul | BinOp::And, Some(0)) => return zero(),
        (BinOp::And, Some(m)) if m == ones => return a.clone(),
        (BinOp::Or, Some(m)) if m == ones => return mk_const(width, ones),
        (BinOp::Ult, Some(0)) => return mk_false(),
        (BinOp::Ule, Some(m)) if m == ones => return mk_true(),
        (BinOp::Eq, Some(c)) if width == 1 => {
            return if c == 1 { a.clone() } else { mk_not(a) };
        }
        _ => {}
    }
    match (op, a.as_const()) {
        (BinOp::Shl | BinOp::Lshr, Some(0)) => return zero(),
        (BinOp::Ule, Some(0)) => return mk_true(),
        _ => {}
    }
    if a == b {
        match op {
            BinOp::And | BinOp::Or => return a.clone(),
            BinOp::Xor | BinOp::Sub => return zero(),
            BinOp::Eq | BinOp::Ule => return mk_true(),
            BinOp::Ult => return mk_false(),
            _ => {}
        }
    }
    if op == BinOp::Eq {
        if let Some(t) = eq_through_ite(a, b).or_else(|| eq_through_ite(b, a)) {
            return t;
        }
    }
    raw_binary(op, a, b)
}

/// `ite(c, x, y) == z` when `z` is one of the branches, when both sides
/// branch on the same condition, or when everything is constant.
fn eq_through_ite(a: &Term, z: &Term) -> Option<Term> {
    let TermKind::Ite(c, x, y) = a.kind() else {
        return None;
    };
    if z == y {
        return Some(mk_or(&mk_not(c), &mk_eq(x, y)));
    }
    if z == x {
        return Some(mk_or(c, &mk_eq(x, y)));
    }
    if let TermKind::Ite(c2, u, v) = z.kind() {
        if c2 == c {
            return Some(mk_ite(c, &mk_eq(x, u), &mk_eq(y, v)));
        }
    }
    if let (Some(k), Some(kx), Some(ky)) = (z.as_const(), x.as_const(), y.as_const()) {
        return Some(match (k == kx, k == ky) {
            (true, true) => mk_true(),
            (true, false) => c.clone(),
            (false, true) => mk_not(c),
            (false, false) => mk_false(),
        });
    }
    None
}

pub fn mk_add(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Add, a, b)
}
pub fn mk_sub(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Sub, a, b)
}
pub fn mk_mul(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Mul, a, b)
}
pub fn mk_and(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::And, a, b)
}
pub fn mk_or(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Or, a, b)
}
pub fn mk_xor(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Xor, a, b)
}
pub fn mk_shl(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Shl, a, b)
}
pub fn mk_lshr(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Lshr, a, b)
}
pub fn mk_eq(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Eq, a, b)
}
pub fn mk_ne(a: &Term, b: &Term) -> Term {
    mk_not(&mk_eq(a, b))
}
pub fn mk_ult(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Ult, a, b)
}
pub fn mk_ule(a: &Term, b: &Term) -> Term {
    mk_binary(BinOp::Ule, a, b)
}

pub fn mk_zext(a: &Term, width: u32) -> Term {
    check_width(width);
    assert!(
        width >= a.width(),
        "zext to {width} narrower than operand width {}",
        a.width()
    );
    if width == a.width() {
        return a.clone();
    }
    if let Some(v) = a.as_const() {
        return mk_const(width, v);
    }
    let inner = match a.kind() {
        TermKind::ZExt(x) => x.clone(),
        _ => a.clone(),
    };
    intern(Key::ZExt(width, inner.id()), width, || TermKind::ZExt(inner.clone()))
}

pub fn mk_trunc(a: &Term, width: u32) -> Term {
    check_width(width);
    assert!(
        width <= a.width(),
        "trunc to {width} wider than operand width {}",
        a.width()
    );
    if width == a.width() {
        return a.clone();
    }
    if let Some(v) = a.as_const() {
        return mk_const(width, v);
    }
    match a.kind() {
        TermKind::ZExt(x) if x.width() == width => return x.clone(),
        TermKind::ZExt(x) if x.width() > width => return mk_trunc(x, width),
        TermKind::ZExt(x) => return mk_zext(x, width),
        TermKind::Trunc(x) => return mk_trunc(x, width),
        _ => {}
    }
    intern(Key::Trunc(width, a.id()), width, || TermKind::Trunc(a.clone()))
}

pub fn mk_ite(c: &Term, a: &Term, b: &Term) -> Term {
    assert_eq!(c.width(), 1, "ite condition must have width 1, got {c}");
    assert_eq!(a.width(), b.width(), "ite branch width mismatch: {a} vs {b}");
    match c.as_const() {
        Some(1) => return a.clone(),
        Some(_) => return b.clone(),
        None => {}
    }
    if a == b {
        return a.clone();
    }
    if a.width() == 1 {
        match (a.as_const(), b.as_const()) {
            (Some(1), Some(0)) => return c.clone(),
            (Some(0), Some(1)) => return mk_not(c),
            _ => {}
        }
    }
    intern(Key::Ite(c.id(), a.id(), b.id()), a.width(), || {
        TermKind::Ite(c.clone(), a.clone(), b.clone())
    })
}

// ---------------------------------------------------------------------------
// Concrete evaluation

/// Concrete values for variables, keyed by variable name.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<String, u64>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: u64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        self.0.get(name).copied()
    }

    /// Value of `name`, or zero when unassigned.
    pub fn value_or_zero(&self, name: &str) -> u64 {
        self.get(name).unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, u64)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no value assigned to variable {0}")]
    MissingAssignment(String),
}

pub fn eval(t: &Term, a: &Assignment) -> Result<u64, EvalError> {
    let mut memo = HashMap::new();
    eval_memo(t, a, &mut memo)
}

fn eval_memo(t: &Term, a: &Assignment, memo: &mut HashMap<u64, u64>) -> Result<u64, EvalError> {
    if let Some(v) = memo.get(&t.id()) {
        return Ok(*v);
    }
    let v = match t.kind() {
        TermKind::Const(v) => *v,
        TermKind::Var(name) => {
            let v = a
                .get(name)
                .ok_or_else(|| EvalError::MissingAssignment(name.to_string()))?;
            v & mask(t.width())
        }
        TermKind::Unary(op, x) => ops::unary(*op, t.width(), eval_memo(x, a, memo)?),
        TermKind::Binary(op, x, y) => {
            let xv = eval_memo(x, a, memo)?;
            let yv = eval_memo(y, a, memo)?;
            ops::binary(*op, x.width(), xv, yv)
        }
        TermKind::ZExt(x) => eval_memo(x, a, memo)?,
        TermKind::Trunc(x) => eval_memo(x, a, memo)? & mask(t.width()),
        TermKind::Ite(c, x, y) => {
            if eval_memo(c, a, memo)? == 1 {
                eval_memo(x, a, memo)?
            } else {
                eval_memo(y, a, memo)?
            }
        }
    };
    memo.insert(t.id(), v);
    Ok(v)
}

// ---------------------------------------------------------------------------
// Path conditions

/// An ordered conjunction of width-1 terms.
///
/// Never stores the constant-true term or duplicates; any constant-false
/// conjunct collapses the whole condition to the canonical FALSE.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct PathCondition {
    conjuncts: Vec<Term>,
    is_false: bool,
}

impl PathCondition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn falsum() -> Self {
        PathCondition {
            conjuncts: Vec::new(),
            is_false: true,
        }
    }

    pub fn from_conjuncts<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Self {
        let mut pc = Self::new();
        for t in terms {
            pc.push(t.clone());
        }
        pc
    }

    pub fn push(&mut self, c: Term) {
        assert_eq!(c.width(), 1, "path condition conjunct must have width 1: {c}");
        if self.is_false || c.is_true() {
            return;
        }
        if c.is_false() {
            *self = Self::falsum();
            return;
        }
        if !self.conjuncts.contains(&c) {
            self.conjuncts.push(c);
        }
    }

    /// `pc_and`: a copy of `self` with `c` conjoined.
    pub fn and(&self, c: &Term) -> Self {
        let mut out = self.clone();
        out.push(c.clone());
        out
    }

    pub fn and_all(&self, other: &PathCondition) -> Self {
        if other.is_false {
            return Self::falsum();
        }
        let mut out = self.clone();
        for c in &other.conjuncts {
            out.push(c.clone());
        }
        out
    }

    pub fn conjuncts(&self) -> &[Term] {
        &self.conjuncts
    }

    pub fn is_true(&self) -> bool {
        !self.is_false && self.conjuncts.is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.is_false
    }

    pub fn free_vars(&self) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        collect_vars(self.conjuncts.iter(), &mut out);
        out
    }

    /// Whether every conjunct evaluates to 1 under `a`.
    pub fn holds(&self, a: &Assignment) -> Result<bool, EvalError> {
        if self.is_false {
            return Ok(false);
        }
        let mut memo = HashMap::new();
        for c in &self.conjuncts {
            if eval_memo(c, a, &mut memo)? != 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false {
            return write!(f, "false");
        }
        if self.conjuncts.is_empty() {
            return write!(f, "true");
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PathCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathCondition({self})")
    }
}
