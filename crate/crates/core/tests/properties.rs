//! Properties over randomly generated model pairs small enough to enumerate.

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::select;
use vpdiff_core::diffcheck::run_scenario;
use vpdiff_core::oracle::{exhaustive_diffs, guided_violations, input_space, partition_violations, MAX_BITS};
use vpdiff_core::{
    build_harness, load_model, run_pipeline, Certainty, DiffKind, HarnessConfig, HarnessPlan, SourceUnit,
    ValidatedModel,
};

/// Expression text over `leaves`; literals never stand alone in a binary
/// node, so every width is inferable.
fn expr(leaves: &'static [&'static str], depth: u32) -> BoxedStrategy<String> {
    let var = select(leaves.to_vec()).prop_map(String::from);
    if depth == 0 {
        return var.boxed();
    }
    let lit = prop_oneof![Just(0u64), Just(1), Just(0x80), Just(0xff), 0u64..16].prop_map(|v| v.to_string());
    let op = select(vec!["+", "-", "*", "&", "|", "^", "<<", ">>"]);
    prop_oneof![
        2 => var,
        2 => (expr(leaves, depth - 1), op.clone(), lit).prop_map(|(a, o, b)| format!("({a} {o} {b})")),
        2 => (expr(leaves, depth - 1), op, expr(leaves, depth - 1)).prop_map(|(a, o, b)| format!("({a} {o} {b})")),
        1 => expr(leaves, depth - 1).prop_map(|a| format!("~{a}")),
        1 => (cond(leaves, depth - 1), expr(leaves, depth - 1), expr(leaves, depth - 1))
            .prop_map(|(c, a, b)| format!("ite({c}, {a}, {b})")),
    ]
    .boxed()
}

fn cond(leaves: &'static [&'static str], depth: u32) -> BoxedStrategy<String> {
    let cmp = select(vec!["==", "!=", "<", "<=", ">", ">="]);
    let rhs = prop_oneof![
        prop_oneof![Just(0u64), Just(4), Just(8), Just(0x7f), 0u64..256].prop_map(|v| v.to_string()),
        expr(leaves, depth),
    ];
    let offset = select(vec!["offset == 0", "offset == 1", "offset != 0"]).prop_map(String::from);
    prop_oneof![
        3 => (expr(leaves, depth), cmp, rhs).prop_map(|(a, c, b)| format!("{a} {c} {b}")),
        1 => offset,
    ]
    .boxed()
}

fn stmt(leaves: &'static [&'static str], ret: bool, depth: u32) -> BoxedStrategy<String> {
    let assign = (select(vec!["r", "s"]), expr(leaves, 2)).prop_map(|(f, e)| format!("{f} = {e};"));
    let store = (expr(leaves, 1), expr(leaves, 2)).prop_map(|(i, e)| format!("arr[{i}] = {e};"));
    let irq = expr(leaves, 1).prop_map(|e| format!("fire_interrupt({e});"));
    let out = expr(leaves, 1).prop_map(|e| format!("send_output({e});"));
    let mut simple = vec![assign.boxed(), store.boxed(), irq.boxed(), out.boxed()];
    if ret {
        simple.push(expr(leaves, 2).prop_map(|e| format!("return {e};")).boxed());
    }
    let simple = proptest::strategy::Union::new(simple).boxed();
    if depth == 0 {
        return simple;
    }
    let block = move |n| proptest::collection::vec(stmt(leaves, ret, depth - 1), 0..n).prop_map(|v| v.join(" "));
    prop_oneof![
        3 => simple,
        2 => (cond(leaves, 1), block(3), block(2)).prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
    ]
    .boxed()
}

const WRITE_LEAVES: &[&str] = &["value"];
const READ_LEAVES: &[&str] = &["r"];

fn body(leaves: &'static [&'static str], ret: bool) -> BoxedStrategy<String> {
    proptest::collection::vec(stmt(leaves, ret, 2), 1..4)
        .prop_map(|v| v.join("\n    "))
        .boxed()
}

/// Source of a model whose every scenario enumerates in 9 bits: a one-bit
/// offset that only appears in conditions, plus `value` for the write
/// handler (which reads no state) or `r` for the read handler.
fn arb_model_text() -> BoxedStrategy<String> {
    let spin = prop_oneof![
        3 => Just(String::new()),
        1 => (1u64..8).prop_map(|m| format!(
            "local i : u8; while (i < (value & {m})) {{ i = i + 1; s = i; }}"
        )),
    ];
    (body(WRITE_LEAVES, false), spin, body(READ_LEAVES, true))
        .prop_map(|(w, spin, r)| {
            format!(
                "model R {{\n  state {{ reg r : u8; reg s : u8; reg arr[2] : u8; }}\n  \
                 handler mmio_write(offset : u1, value : u8) {{\n    {w}\n    {spin}\n  }}\n  \
                 handler mmio_read(offset : u1) -> u8 {{\n    {r}\n  }}\n}}\n"
            )
        })
        .boxed()
}

fn arb_model() -> impl Strategy<Value = Arc<ValidatedModel>> {
    arb_model_text().prop_filter_map("model does not validate", |text| {
        load_model(&SourceUnit::new("gen.dm", text), 3).ok().map(Arc::new)
    })
}

/// A pair where the new version is either unrelated or a one-statement
/// edit away from the old one, so both equal and differing pairs occur.
fn arb_pair() -> impl Strategy<Value = (Arc<ValidatedModel>, Arc<ValidatedModel>)> {
    prop_oneof![(arb_model(), arb_model()), arb_model().prop_map(|m| (m.clone(), m)),]
}

fn plan(old: &Arc<ValidatedModel>, new: &Arc<ValidatedModel>) -> HarnessPlan {
    build_harness(old.clone(), new.clone(), &HarnessConfig::default()).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        max_global_rejects: 100_000,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn pipeline_matches_exhaustive_differencing((old, new) in arb_pair()) {
        let plan = plan(&old, &new);
        let report = run_pipeline(&plan).unwrap();
        let pair = &report.pairs[0];
        prop_assert!(pair.possible_diffs.is_empty(), "{:?}", pair.possible_diffs);
        prop_assert_eq!(pair.replay_failures, 0);
        for sc in &plan.scenarios {
            let space = input_space(&plan, sc, MAX_BITS).expect("generated scenarios enumerate");
            let want = exhaustive_diffs(&plan, sc, &space);
            let got: BTreeSet<DiffKind> = pair
                .unique_diffs
                .iter()
                .filter(|d| d.scenario == sc.handler && d.certainty == Certainty::Confirmed)
                .map(|d| d.kind.clone())
                .collect();
            prop_assert_eq!(got, want, "scenario {}", sc.handler);
        }
    }

    #[test]
    fn paths_partition_inputs_and_guidance_is_exact((old, new) in arb_pair()) {
        let plan = plan(&old, &new);
        for sc in &plan.scenarios {
            let space = input_space(&plan, sc, MAX_BITS).unwrap();
            let inputs = space.inputs();
            let run = run_scenario(&plan, sc).unwrap();
            let everything = vpdiff_core::PathCondition::new();
            let v = partition_violations(&run.new_paths, &everything, &inputs);
            prop_assert!(v.is_empty(), "{}: {:?}", sc.handler, v);
            for (np, guided) in run.new_paths.iter().zip(&run.old_paths) {
                let v = guided_violations(np, guided, &inputs);
                prop_assert!(v.is_empty(), "{}: {:?}", sc.handler, v);
            }
        }
    }

    #[test]
    fn reports_are_deterministic((old, new) in arb_pair()) {
        let plan = plan(&old, &new);
        let mut a = run_pipeline(&plan).unwrap();
        let mut b = run_pipeline(&plan).unwrap();
        a.zero_resources();
        b.zero_resources();
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn identical_versions_never_differ(m in arb_model()) {
        let report = run_pipeline(&plan(&m, &m)).unwrap();
        let pair = &report.pairs[0];
        prop_assert!(pair.unique_diffs.is_empty() && pair.possible_diffs.is_empty());
        prop_assert_eq!(pair.paths_new, pair.paths_old);
    }
}
