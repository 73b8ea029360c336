use proptest::prelude::*;
use vpdiff_core::oracle::terms::{arb_expr, RefExpr, Vocab};
use vpdiff_core::term::{self, Assignment, PathCondition, Term};
use vpdiff_core::{SolveResult, Solver, SolverConfig};

/// Middle-ordered variables that only some conjuncts mention, so pruning
/// has to skip levels to stay fast.
const VOCAB: Vocab = &[("a1", 1), ("b8", 8), ("c1", 1), ("d8", 8), ("e1", 1)];

/// First satisfying assignment in name-then-value order, by counting.
fn brute_force(pc: &PathCondition) -> Option<Assignment> {
    let vars: Vec<(String, u32)> = pc.free_vars().into_iter().collect();
    let total: u32 = vars.iter().map(|(_, w)| w).sum();
    for n in 0u64..(1 << total) {
        let mut a = Assignment::new();
        let mut rest = n;
        for (name, w) in vars.iter().rev() {
            a.set(name, rest & term::mask(*w));
            rest >>= w;
        }
        if pc.holds(&a).unwrap() {
            return Some(a);
        }
    }
    None
}

fn arb_pc() -> impl Strategy<Value = PathCondition> {
    proptest::collection::vec(arb_expr(VOCAB, 1, 3), 1..6).prop_map(|cs| {
        let terms: Vec<Term> = cs.iter().map(RefExpr::build).collect();
        PathCondition::from_conjuncts(&terms)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn builtin_finds_the_smallest_witness(pc in arb_pc()) {
        let got = Solver::new(SolverConfig::default()).solve(&pc);
        match brute_force(&pc) {
            Some(want) => prop_assert_eq!(got, SolveResult::Sat(want), "{}", pc),
            None => prop_assert_eq!(got, SolveResult::Unsat, "{}", pc),
        }
    }
}

#[test]
fn late_constraints_leave_the_middle_variable_smallest() {
    let a = term::mk_var("a", 8);
    let m = term::mk_var("m", 8);
    let z = term::mk_var("z", 8);
    let pc = PathCondition::new()
        .and(&term::mk_ult(&z, &term::mk_const(8, 2)))
        .and(&term::mk_eq(&z, &term::mk_add(&a, &term::mk_const(8, 7))))
        .and(&term::mk_ult(&m, &z));
    let r = Solver::new(SolverConfig::default()).solve(&pc);
    let w = r.witness().expect("sat");
    assert_eq!((w.get("a"), w.get("m"), w.get("z")), (Some(250), Some(0), Some(1)));
}
