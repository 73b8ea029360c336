//! Exhaustive enumeration over the free variables of a path condition.
//!
//! Variables are ordered by name and enumerated depth-first with ascending
//! values, so the first model found is the lexicographically smallest. A
//! conjunct is evaluated as soon as the last variable it mentions has been
//! fixed, which prunes whole subtrees without changing the visit order.
//! When every value at a level fails, the search backjumps to the deepest
//! variable involved in those failures; values skipped that way cannot
//! lead to a model, so the witness is unchanged.

use std::collections::{BTreeMap, HashMap};

use super::SolveResult;
use crate::term::{self, mask, ops, Assignment, BinOp, PathCondition, Term, TermKind, UnOp};

enum Instr {
    Const(u64),
    Var(usize),
    Unary(UnOp, u32, usize),
    Binary(BinOp, u32, usize, usize),
    Trunc(u64, usize),
    Copy(usize),
    Ite(usize, usize, usize),
}

/// One conjunct flattened into a topologically ordered instruction list.
struct Program {
    code: Vec<Instr>,
    last_var: Option<usize>,
    /// Bit k set when the program reads variable k (all bits past 64 vars).
    vars: u64,
}

fn bit(slot: usize) -> u64 {
    if slot < 64 {
        1 << slot
    } else {
        !0
    }
}

impl Program {
    fn compile(root: &Term, slots: &HashMap<String, usize>) -> Self {
        let mut code = Vec::new();
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut last_var = None;
        let mut vars = 0u64;
        // Iterative post-order so deep terms do not exhaust the stack.
        let mut stack: Vec<(Term, bool)> = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if index.contains_key(&t.id()) {
                continue;
            }
            let children: Vec<Term> = match t.kind() {
                TermKind::Const(_) | TermKind::Var(_) => vec![],
                TermKind::Unary(_, a) | TermKind::ZExt(a) | TermKind::Trunc(a) => vec![a.clone()],
                TermKind::Binary(_, a, b) => vec![a.clone(), b.clone()],
                TermKind::Ite(c, a, b) => vec![c.clone(), a.clone(), b.clone()],
            };
            if !expanded && !children.is_empty() {
                stack.push((t.clone(), true));
                for c in children.into_iter().rev() {
                    stack.push((c, false));
                }
                continue;
            }
            let at = |c: &Term| index[&c.id()];
            let instr = match t.kind() {
                TermKind::Const(v) => Instr::Const(*v),
                TermKind::Var(name) => {
                    let slot = slots[name.as_ref()];
                    last_var = last_var.max(Some(slot));
                    vars |= bit(slot);
                    Instr::Var(slot)
                }
                TermKind::Unary(op, a) => Instr::Unary(*op, t.width(), at(a)),
                TermKind::Binary(op, a, b) => Instr::Binary(*op, a.width(), at(a), at(b)),
                TermKind::ZExt(a) => Instr::Copy(at(a)),
                TermKind::Trunc(a) => Instr::Trunc(mask(t.width()), at(a)),
                TermKind::Ite(c, a, b) => Instr::Ite(at(c), at(a), at(b)),
            };
            index.insert(t.id(), code.len());
            code.push(instr);
        }
        Program { code, last_var, vars }
    }

    fn run(&self, values: &[u64], scratch: &mut Vec<u64>) -> u64 {
        scratch.clear();
        for instr in &self.code {
            let v = match *instr {
                Instr::Const(v) => v,
                Instr::Var(slot) => values[slot],
                Instr::Unary(op, w, a) => ops::unary(op, w, scratch[a]),
                Instr::Binary(op, w, a, b) => ops::binary(op, w, scratch[a], scratch[b]),
                Instr::Trunc(m, a) => scratch[a] & m,
                Instr::Copy(a) => scratch[a],
                Instr::Ite(c, a, b) => {
                    if scratch[c] == 1 {
                        scratch[a]
                    } else {
                        scratch[b]
                    }
                }
            };
            scratch.push(v);
        }
        *scratch.last().expect("empty program")
    }
}

/// Splits `pc` into groups of conjuncts that share no variables, solves
/// each group on its own and merges the witnesses. Because the groups are
/// independent, the merged witness is still the lexicographically smallest
/// one. The bit budget applies per group.
pub(super) fn solve(pc: &PathCondition, budget_bits: u32) -> SolveResult {
    let mut flat = Vec::new();
    for c in pc.conjuncts() {
        flatten(c, &mut flat);
    }
    let mut conjuncts = Vec::new();
    for c in propagate(&flat) {
        if c.is_false() {
            return SolveResult::Unsat;
        }
        if !c.is_true() {
            flatten(&c, &mut conjuncts);
        }
    }
    let conjuncts = &conjuncts[..];
    let vars: Vec<BTreeMap<String, u32>> = conjuncts.iter().map(|c| c.free_vars()).collect();
    let mut parent: Vec<usize> = (0..conjuncts.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (i, vs) in vars.iter().enumerate() {
        for name in vs.keys() {
            match owner.get(name.as_str()) {
                Some(&j) => {
                    let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    owner.insert(name, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Term>> = BTreeMap::new();
    for (i, c) in conjuncts.iter().enumerate() {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(c.clone());
    }

    let mut witness = Assignment::new();
    let mut over_budget = false;
    for group in groups.values() {
        match solve_group(group, budget_bits) {
            SolveResult::Sat(w) => {
                for (n, v) in w.iter() {
                    witness.set(n, v);
                }
            }
            SolveResult::Unsat => return SolveResult::Unsat,
            SolveResult::Unknown(_) => over_budget = true,
        }
    }
    if over_budget {
        SolveResult::Unknown("budget".into())
    } else {
        SolveResult::Sat(witness)
    }
}

/// Splits `a & b` and `~(a | b)` into separate conjuncts, so each part is
/// checked as early as its own variables allow.
fn flatten(t: &Term, out: &mut Vec<Term>) {
    match t.kind() {
        TermKind::Binary(BinOp::And, a, b) => {
            flatten(a, out);
            flatten(b, out);
        }
        TermKind::Unary(UnOp::Not, inner) => match inner.kind() {
            TermKind::Binary(BinOp::Or, a, b) => {
                flatten(&term::mk_not(a), out);
                flatten(&term::mk_not(b), out);
            }
            _ => out.push(t.clone()),
        },
        _ => out.push(t.clone()),
    }
}

/// Rewrites each conjunct under the facts the others state: `t == k`
/// pins `t` to `k`, and a conjunct `c` (or `~c`) pins `c` to 1 (or 0).
/// The conjunction is unchanged; contradictions fold to false early.
fn propagate(conjuncts: &[Term]) -> Vec<Term> {
    let mut facts: HashMap<u64, (Term, usize)> = HashMap::new();
    let mut conflict = false;
    let mut learn = |key: &Term, value: Term, from: usize| match facts.get(&key.id()) {
        Some((v, _)) => conflict |= v != &value,
        None => {
            facts.insert(key.id(), (value, from));
        }
    };
    for (i, c) in conjuncts.iter().enumerate() {
        learn(c, term::mk_true(), i);
        match c.kind() {
            TermKind::Unary(UnOp::Not, x) => learn(x, term::mk_false(), i),
            TermKind::Binary(BinOp::Eq, a, b) => match (a.as_const(), b.as_const()) {
                (None, Some(_)) => learn(a, b.clone(), i),
                (Some(_), None) => learn(b, a.clone(), i),
                _ => {}
            },
            _ => {}
        }
    }
    if conflict {
        return vec![term::mk_false()];
    }
    conjuncts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            substitute(c, &|t| {
                facts
                    .get(&t.id())
                    .filter(|(_, from)| *from != i)
                    .map(|(v, _)| v.clone())
            })
        })
        .collect()
}

/// Rebuilds `root` bottom-up, replacing every subterm `lookup` maps.
fn substitute(root: &Term, lookup: &dyn Fn(&Term) -> Option<Term>) -> Term {
    let mut done: HashMap<u64, Term> = HashMap::new();
    let mut stack: Vec<(Term, bool)> = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if done.contains_key(&t.id()) {
            continue;
        }
        if let Some(v) = lookup(&t) {
            done.insert(t.id(), v);
            continue;
        }
        let children: Vec<Term> = match t.kind() {
            TermKind::Const(_) | TermKind::Var(_) => vec![],
            TermKind::Unary(_, a) | TermKind::ZExt(a) | TermKind::Trunc(a) => vec![a.clone()],
            TermKind::Binary(_, a, b) => vec![a.clone(), b.clone()],
            TermKind::Ite(c, a, b) => vec![c.clone(), a.clone(), b.clone()],
        };
        if !expanded && !children.is_empty() {
            stack.push((t.clone(), true));
            stack.extend(children.into_iter().map(|c| (c, false)));
            continue;
        }
        let new = |c: &Term| done[&c.id()].clone();
        let rebuilt = match t.kind() {
            TermKind::Const(_) | TermKind::Var(_) => t.clone(),
            TermKind::Unary(op, a) => term::mk_unary(*op, &new(a)),
            TermKind::Binary(op, a, b) => term::mk_binary(*op, &new(a), &new(b)),
            TermKind::ZExt(a) => term::mk_zext(&new(a), t.width()),
            TermKind::Trunc(a) => term::mk_trunc(&new(a), t.width()),
            TermKind::Ite(c, a, b) => term::mk_ite(&new(c), &new(a), &new(b)),
        };
        done.insert(t.id(), rebuilt);
    }
    done.remove(&root.id()).expect("root rebuilt")
}

fn solve_group(conjuncts: &[Term], budget_bits: u32) -> SolveResult {
    let mut all = BTreeMap::new();
    for c in conjuncts {
        all.extend(c.free_vars());
    }
    let vars: Vec<(String, u32)> = all.into_iter().collect();
    let total: u64 = vars.iter().map(|(_, w)| *w as u64).sum();
    if total > budget_bits as u64 {
        return SolveResult::Unknown("budget".into());
    }
    let slots: HashMap<String, usize> = vars.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();

    // checks[k] holds the conjuncts decided once variable k is fixed;
    // the final entry holds variable-free conjuncts.
    let mut checks: Vec<Vec<Program>> = (0..=vars.len()).map(|_| Vec::new()).collect();
    for c in conjuncts {
        let p = Program::compile(c, &slots);
        let level = p.last_var.unwrap_or(vars.len());
        checks[level].push(p);
    }
    let mut scratch = Vec::new();
    let values = vec![0u64; vars.len()];
    if checks[vars.len()].iter().any(|p| p.run(&values, &mut scratch) != 1) {
        return SolveResult::Unsat;
    }

    let widths: Vec<u32> = vars.iter().map(|(_, w)| *w).collect();
    let mut search = Search {
        widths: &widths,
        checks: &checks,
        values,
        scratch,
    };
    if search.descend(0).is_ok() {
        SolveResult::Sat(
            vars.iter()
                .zip(&search.values)
                .map(|((n, _), v)| (n.clone(), *v))
                .collect::<Assignment>(),
        )
    } else {
        SolveResult::Unsat
    }
}

struct Search<'a> {
    widths: &'a [u32],
    checks: &'a [Vec<Program>],
    values: Vec<u64>,
    scratch: Vec<u64>,
}

impl Search<'_> {
    /// `Err` carries the conflict set: earlier variables whose current
    /// values make this subtree fail.
    fn descend(&mut self, level: usize) -> Result<(), u64> {
        if level == self.widths.len() {
            return Ok(());
        }
        let here = bit(level);
        let below = if level < 64 { here - 1 } else { !0 };
        let max = mask(self.widths[level]);
        let mut conflict = 0u64;
        let mut v = 0u64;
        loop {
            self.values[level] = v;
            let failed = self.checks[level]
                .iter()
                .find(|p| p.run(&self.values, &mut self.scratch) != 1);
            match failed {
                Some(p) => conflict |= p.vars & below,
                None => match self.descend(level + 1) {
                    Ok(()) => return Ok(()),
                    Err(c) if c & here == 0 => {
                        self.values[level] = 0;
                        return Err(c);
                    }
                    Err(c) => conflict |= c & below,
                },
            }
            if v == max {
                break;
            }
            v += 1;
        }
        self.values[level] = 0;
        Err(conflict)
    }
}
