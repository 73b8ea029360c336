use super::*;
use crate::dsl::{load_model, SourceUnit};
use crate::solver::{Solver, SolverConfig};
use crate::term::*;

fn model(text: &str) -> ValidatedModel {
    load_model(&SourceUnit::new("t.dm", text), 4).unwrap_or_else(|e| panic!("{e}"))
}

fn solver() -> Solver {
    Solver::new(SolverConfig::default())
}

fn explore(m: &ValidatedModel, h: &str) -> Exploration {
    let hir = m.handler(h).unwrap();
    let args = request_args(hir);
    run_handler(m, h, &init_env(m, None), &args, ExploreBudget::default(), &solver()).unwrap()
}

const FORK: &str = "model M { state { reg ctrl : u8; reg status : u8; } \
    handler mmio_write(offset : u8, value : u8) { \
      if (offset == 0) { ctrl = value; } else { status = status | 1; } } }";

#[test]
fn init_env_names() {
    let m = model("model M { state { reg r : u32; reg rx[2] : u8; } handler h(offset : u8) -> u8 { return 0; } }");
    let env = init_env(&m, None);
    assert_eq!(env.get("r", 0), Some(&mk_var("state.r.0", 32)));
    assert_eq!(env.get("rx", 1), Some(&mk_var("state.rx.1", 8)));
    assert_eq!(env.field("rx").unwrap().elems.len(), 2);
}

#[test]
fn init_env_shares_nodes_across_models() {
    let a = model("model A { state { reg ctrl : u32; } handler h(offset : u8) -> u8 { return 0; } }");
    let b = model("model B { state { reg x : u8; reg ctrl : u32; } handler h(offset : u8) -> u8 { return 1; } }");
    let (ea, eb) = (init_env(&a, None), init_env(&b, None));
    let (ta, tb) = (ea.get("ctrl", 0).unwrap(), eb.get("ctrl", 0).unwrap());
    assert_eq!(ta.id(), tb.id());
}

#[test]
fn one_fork_two_paths() {
    let m = model(FORK);
    let ex = explore(&m, "mmio_write");
    assert!(!ex.truncated);
    assert_eq!(ex.summaries.len(), 2);
    let off = mk_var("req.mmio_write.offset", 8);
    let value = mk_var("req.mmio_write.value", 8);
    let zero = mk_const(8, 0);
    let s1 = &ex.summaries[0];
    assert_eq!(s1.pc.conjuncts(), &[mk_eq(&off, &zero)]);
    assert_eq!(s1.final_state.get("ctrl", 0), Some(&value));
    let s2 = &ex.summaries[1];
    assert_eq!(s2.pc.conjuncts(), &[mk_ne(&off, &zero)]);
    let status = mk_var("state.status.0", 8);
    assert_eq!(s2.final_state.get("status", 0), Some(&mk_or(&status, &mk_const(8, 1))));
    assert_eq!((s1.path_id, s2.path_id), (0, 1));
}

#[test]
fn straight_line() {
    let m = model("model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { r = r + 1; } }");
    let ex = explore(&m, "mmio_write");
    assert_eq!(ex.summaries.len(), 1);
    let s = &ex.summaries[0];
    assert!(s.pc.is_true());
    assert_eq!(
        s.final_state.get("r", 0),
        Some(&mk_add(&mk_var("state.r.0", 8), &mk_const(8, 1)))
    );
    assert_eq!(s.return_term, None);
    assert_eq!(s.status, PathStatus::Complete);
}

const CHAIN: &str = "model M { state { reg a : u8; reg b : u8; reg c : u8; } \
    handler mmio_read(offset : u8) -> u8 { \
      if (offset == 0) { return a; } \
      if (offset == 4) { return b; } \
      if (offset == 8) { return c; } \
      return 0xff; } }";

#[test]
fn chained_ifs_partition_all_offsets() {
    let m = model(CHAIN);
    let ex = explore(&m, "mmio_read");
    assert_eq!(ex.summaries.len(), 4);
    let mut hits = [0usize; 4];
    for off in 0..=255u64 {
        let mut a = Assignment::new();
        a.set("req.mmio_read.offset", off);
        let covering: Vec<usize> = ex
            .summaries
            .iter()
            .filter(|s| s.pc.holds(&a).unwrap())
            .map(|s| s.path_id)
            .collect();
        assert_eq!(covering.len(), 1, "offset {off} covered by {covering:?}");
        hits[covering[0]] += 1;
    }
    assert_eq!(hits, [1, 1, 1, 253]);
    for s in &ex.summaries {
        assert!(s.return_term.is_some());
    }
}

fn guided(m: &ValidatedModel, guide: &PathCondition) -> Exploration {
    let h = &m.handlers()[0];
    let args = request_args(h);
    run_guided(
        m,
        &h.name,
        &init_env(m, None),
        &args,
        guide,
        ExploreBudget::default(),
        &solver(),
    )
    .unwrap()
}

#[test]
fn guide_prunes_else() {
    let m = model(
        "model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { \
         if (offset == 0) { r = 1; } else { r = 2; } } }",
    );
    let off = mk_var("req.mmio_write.offset", 8);
    let guide = PathCondition::new().and(&mk_eq(&off, &mk_const(8, 0)));
    let ex = guided(&m, &guide);
    assert_eq!(ex.summaries.len(), 1);
    assert_eq!(ex.summaries[0].pc, guide);
    assert_eq!(ex.summaries[0].final_state.get("r", 0), Some(&mk_const(8, 1)));
}

#[test]
fn vacuous_guide_matches_unguided() {
    let m = model(FORK);
    let a = guided(&m, &PathCondition::new());
    let b = explore(&m, "mmio_write");
    assert_eq!(a.summaries.len(), b.summaries.len());
    for (x, y) in a.summaries.iter().zip(&b.summaries) {
        assert_eq!(x.pc, y.pc);
        assert_eq!(x.final_state, y.final_state);
    }
}

#[test]
fn orthogonal_branch_survives_guide() {
    let m = model(
        "model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { \
         if (value < 10) { r = 1; } else { r = 2; } } }",
    );
    let off = mk_var("req.mmio_write.offset", 8);
    let guide = PathCondition::new().and(&mk_eq(&off, &mk_const(8, 0)));
    let ex = guided(&m, &guide);
    assert_eq!(ex.summaries.len(), 2);
    assert!(!ex.summaries[0].pc.conjuncts().contains(&mk_eq(&off, &mk_const(8, 0))));
}

#[test]
fn unsat_guide_yields_nothing() {
    let m = model(FORK);
    let ex = guided(&m, &PathCondition::falsum());
    assert!(ex.summaries.is_empty());
}

fn concrete_state(pairs: &[(&str, Vec<u64>)]) -> ConcreteState {
    pairs.iter().map(|(n, v)| (n.to_string(), v.clone())).collect()
}

#[test]
fn concrete_assign() {
    let m = model(FORK);
    let st = concrete_state(&[("ctrl", vec![0]), ("status", vec![0])]);
    let out = run_concrete(
        &m,
        "mmio_write",
        &st,
        &[ConcreteArg::Scalar(0), ConcreteArg::Scalar(7)],
        &DmaOracle::new(),
        4,
    )
    .unwrap();
    assert_eq!(out.state["ctrl"], vec![7]);
    assert_eq!(out.status, PathStatus::Complete);
}

#[test]
fn concrete_wraparound() {
    let m = model("model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { r = r + 1; } }");
    let args = [ConcreteArg::Scalar(0), ConcreteArg::Scalar(0)];
    let st = concrete_state(&[("r", vec![255])]);
    let once = run_concrete(&m, "mmio_write", &st, &args, &DmaOracle::new(), 4).unwrap();
    assert_eq!(once.state["r"], vec![0]);
    let twice = run_concrete(&m, "mmio_write", &once.state, &args, &DmaOracle::new(), 4).unwrap();
    assert_eq!(twice.state["r"], vec![1]);
}

#[test]
fn symbolic_index_out_of_range_is_an_error_path() {
    let m = model(
        "model M { state { reg ring[3] : u8; reg head : u8; } \
         handler mmio_write(offset : u8, value : u8) { ring[head] = value; } }",
    );
    let ex = explore(&m, "mmio_write");
    let statuses: Vec<_> = ex.summaries.iter().map(|s| s.status.clone()).collect();
    assert_eq!(
        statuses,
        vec![PathStatus::OutOfBounds { field: "ring".into() }, PathStatus::Complete]
    );
    let ok = &ex.summaries[1];
    let mut a = Assignment::new();
    for (n, v) in [("state.head.0", 1), ("req.mmio_write.value", 9), ("state.ring.1", 4)] {
        a.set(n, v);
    }
    for n in ["state.ring.0", "state.ring.2", "req.mmio_write.offset"] {
        a.set(n, 0);
    }
    let st = ok.final_state.eval(&a).unwrap();
    assert_eq!(st["ring"], vec![0, 9, 0]);
}

#[test]
fn loop_bound_exhaustion_is_reported() {
    let m = model(
        "model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { \
         local i : u8; while (i < value) { r = r + 1; i = i + 1; } } }",
    );
    let ex = explore(&m, "mmio_write");
    let exhausted = ex
        .summaries
        .iter()
        .filter(|s| s.status == PathStatus::BoundExhausted)
        .count();
    assert_eq!(exhausted, 1);
    assert_eq!(ex.summaries.len(), 6);
}

#[test]
fn dynamic_loops_match_unrolled_loops() {
    let text = "model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { \
         local i : u8; while (i < value) { r = r + 1; i = i + 1; } } }";
    let ast = crate::dsl::parse_model(&SourceUnit::new("t", text)).unwrap();
    let raw = crate::dsl::validate_model(&ast).unwrap();
    let unrolled = model(text);
    let a = explore(&raw, "mmio_write");
    let b = explore(&unrolled, "mmio_write");
    assert_eq!(a.summaries.len(), b.summaries.len());
    for (x, y) in a.summaries.iter().zip(&b.summaries) {
        assert_eq!(x.pc, y.pc);
        assert_eq!(x.status, y.status);
        assert_eq!(x.final_state, y.final_state);
    }
}

#[test]
fn dma_reads_are_fresh_per_occurrence() {
    let m = model(
        "model M { state { reg a : u64; } handler mmio_write(offset : u64, value : u64) { \
         local i : u8; while (i < 2) { a = a + dma_read(value); i = i + 1; } } }",
    );
    let ex = explore(&m, "mmio_write");
    assert_eq!(ex.summaries.len(), 1);
    let s = &ex.summaries[0];
    let names: Vec<String> = s
        .effects
        .iter()
        .map(|e| match &e.kind {
            EffectKind::DmaRead { result, .. } => result.as_var().unwrap().to_string(),
            _ => panic!(),
        })
        .collect();
    assert_eq!(names, ["dma.mmio_write.0.0", "dma.mmio_write.0.1"]);
    assert_eq!(s.effects.iter().map(|e| e.seq).collect::<Vec<_>>(), [0, 1]);
}

#[test]
fn max_paths_truncates() {
    let m = model(CHAIN);
    let h = m.handler("mmio_read").unwrap();
    let budget = ExploreBudget {
        max_paths: 2,
        ..ExploreBudget::default()
    };
    let ex = run_handler(
        &m,
        "mmio_read",
        &init_env(&m, None),
        &request_args(h),
        budget,
        &solver(),
    )
    .unwrap();
    assert!(ex.truncated);
    assert_eq!(ex.summaries.len(), 2);
}

#[test]
fn step_limit_truncates() {
    let m = model(CHAIN);
    let h = m.handler("mmio_read").unwrap();
    let budget = ExploreBudget {
        max_steps_per_path: 2,
        ..ExploreBudget::default()
    };
    let ex = run_handler(
        &m,
        "mmio_read",
        &init_env(&m, None),
        &request_args(h),
        budget,
        &solver(),
    )
    .unwrap();
    assert!(ex.truncated);
    assert_eq!(ex.summaries.len(), 1);
}

#[test]
fn unknown_handler_and_bad_args() {
    let m = model(FORK);
    let env = init_env(&m, None);
    let r = run_handler(&m, "nosuch", &env, &[], ExploreBudget::default(), &solver());
    assert!(matches!(r, Err(InterpError::UnknownHandler(_))));
    let r = run_handler(&m, "mmio_write", &env, &[], ExploreBudget::default(), &solver());
    assert!(matches!(r, Err(InterpError::BadArguments { .. })));
}

#[test]
fn unknown_solver_result_flags_paths() {
    let m = model(
        "model M { state { reg r : u32; } handler mmio_write(offset : u32, value : u32) { \
         if (value * value == 0x10) { r = 1; } } }",
    );
    let h = m.handler("mmio_write").unwrap();
    let s = Solver::new(SolverConfig {
        builtin_budget_bits: 8,
        ..SolverConfig::default()
    });
    let ex = run_handler(
        &m,
        "mmio_write",
        &init_env(&m, None),
        &request_args(h),
        ExploreBudget::default(),
        &s,
    )
    .unwrap();
    assert!(ex.summaries.iter().any(|p| p.unknown));
}

#[test]
fn dma_oracle_from_witness() {
    let mut a = Assignment::new();
    a.set("dma.rx.2.1", 77);
    a.set("dma.other.0.0", 5);
    let o = DmaOracle::from_assignment("rx", &a);
    assert_eq!(o.get(2, 1), 77);
    assert_eq!(o.get(0, 0), 0);
}
