use std::sync::Arc;

use super::*;
use crate::dsl::{load_model, SourceUnit, ValidatedModel};
use crate::harness::{build_harness, HarnessConfig};
use crate::interp::{init_env, request_args, run_handler, ExploreBudget};
use crate::solver::SolverConfig;

fn model(text: &str) -> Arc<ValidatedModel> {
    Arc::new(load_model(&SourceUnit::new("t.dm", text), 4).unwrap_or_else(|e| panic!("{e}")))
}

fn write_model(body: &str) -> Arc<ValidatedModel> {
    model(&format!(
        "model M {{ state {{ reg ctrl : u8; reg status : u8; }} \
         handler mmio_write(offset : u8, value : u8) {{ {body} }} }}"
    ))
}

fn pipeline(old: &Arc<ValidatedModel>, new: &Arc<ValidatedModel>) -> PairReport {
    let plan = build_harness(old.clone(), new.clone(), &HarnessConfig::default()).unwrap();
    run_pipeline(&plan).unwrap().pairs.remove(0)
}

#[test]
fn identical_models_have_no_diffs() {
    let m = write_model("if (offset == 0) { ctrl = value; } else { status = status + value; }");
    let r = pipeline(&m, &m);
    assert_eq!(r.raw_diffs, 0);
    assert!(r.unique_diffs.is_empty());
    assert_eq!(r.paths_new, 2);
    assert_eq!(r.paths_old, 2);
}

#[test]
fn or_one_gives_even_witness() {
    let old = write_model("ctrl = value;");
    let new = write_model("ctrl = value | 1;");
    let r = pipeline(&old, &new);
    assert_eq!(r.unique_diffs.len(), 1);
    let d = &r.unique_diffs[0];
    assert_eq!(
        d.kind,
        DiffKind::State {
            field: "ctrl".into(),
            index: 0
        }
    );
    let v = d.witness.as_ref().unwrap().value_or_zero("req.mmio_write.value");
    assert_eq!(v % 2, 0);
    assert_eq!((d.new_value, d.old_value), (Some(v | 1), Some(v)));
}

fn summaries(m: &ValidatedModel) -> Vec<crate::interp::PathSummary> {
    let h = &m.handlers()[0];
    run_handler(
        m,
        &h.name,
        &init_env(m, None),
        &request_args(h),
        ExploreBudget::default(),
        &Solver::default(),
    )
    .unwrap()
    .summaries
}

fn spec() -> CompareSpec {
    CompareSpec {
        state_fields: vec!["ctrl".into(), "status".into()],
        compare_return: true,
        compare_effects: true,
    }
}

#[test]
fn compare_pair_examples() {
    let same = summaries(&write_model("ctrl = value;"));
    assert!(compare_pair("w", &same[0], &same[0], &spec(), &Solver::default()).is_empty());

    let new = summaries(&write_model("ctrl = value | 1;"));
    let recs = compare_pair("w", &new[0], &same[0], &spec(), &Solver::default());
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].certainty, Certainty::Confirmed);
    assert_eq!(recs[0].witness.as_ref().unwrap().get("req.mmio_write.value"), Some(0));

    let split = summaries(&write_model("if (offset == 0) { ctrl = 1; } else { ctrl = 2; }"));
    assert!(compare_pair("w", &split[0], &split[1], &spec(), &Solver::default()).is_empty());
}

fn record(scenario: &str, kind: DiffKind, certainty: Certainty, ids: (usize, usize)) -> DiffRecord {
    DiffRecord {
        scenario: scenario.into(),
        kind,
        certainty,
        witness: None,
        new_path_id: ids.0,
        old_path_id: ids.1,
        new_term: None,
        old_term: None,
        reason: None,
    }
}

fn state(f: &str) -> DiffKind {
    DiffKind::State {
        field: f.into(),
        index: 0,
    }
}

#[test]
fn dedupe_groups_by_key() {
    let recs = vec![
        record("w", state("ctrl"), Certainty::Confirmed, (1, 0)),
        record("w", state("ctrl"), Certainty::Confirmed, (0, 3)),
        record("w", state("status"), Certainty::Confirmed, (0, 0)),
    ];
    let g = dedupe(&recs);
    assert_eq!(g.len(), 2);
    assert_eq!(g[0].count, 2);
    assert_eq!(
        (g[0].representative.new_path_id, g[0].representative.old_path_id),
        (0, 3)
    );
    assert_eq!(g[1].key.kind, state("status"));

    let reps: Vec<DiffRecord> = g.iter().map(|x| x.representative.clone()).collect();
    let again = dedupe(&reps);
    assert_eq!(again.len(), g.len());
    for (a, b) in again.iter().zip(&g) {
        assert_eq!(a.key, b.key);
    }
}

#[test]
fn confirmed_outranks_possible() {
    let recs = vec![
        record("w", state("ctrl"), Certainty::Possible, (0, 0)),
        record("w", state("ctrl"), Certainty::Confirmed, (5, 5)),
    ];
    let g = dedupe(&recs);
    assert_eq!(g[0].representative.certainty, Certainty::Confirmed);
    assert_eq!(g[0].count, 2);
}

#[test]
fn effect_length_and_kind_mismatch() {
    let old = write_model("if (offset == 8) { send_output(value); }");
    let new = write_model("if (offset == 8) { fire_interrupt(1); fire_interrupt(2); }");
    let r = pipeline(&old, &new);
    let kinds: Vec<&DiffKind> = r.unique_diffs.iter().map(|d| &d.kind).collect();
    assert_eq!(
        kinds,
        [
            &DiffKind::Effect {
                position: 0,
                detail: EffectDetail::KindMismatch
            },
            &DiffKind::Effect {
                position: 1,
                detail: EffectDetail::LengthMismatch
            },
        ]
    );
}

#[test]
fn effect_argument_mismatch() {
    let old = write_model("fire_interrupt(offset);");
    let new = write_model("fire_interrupt(offset & 0x7f);");
    let r = pipeline(&old, &new);
    assert_eq!(r.unique_diffs.len(), 1);
    let w = r.unique_diffs[0].witness.as_ref().unwrap();
    assert_eq!(w.get("req.mmio_write.offset"), Some(0x80));
}

#[test]
fn status_mismatch_is_error_path() {
    let m = |body: &str| {
        model(&format!(
            "model M {{ state {{ reg ring[4] : u8; reg head : u8; }} \
             handler mmio_write(offset : u8, value : u8) {{ {body} }} }}"
        ))
    };
    let old = m("ring[head] = value;");
    let new = m("ring[head & 3] = value;");
    let r = pipeline(&old, &new);
    assert_eq!(r.unique_diffs.len(), 1);
    assert_eq!(
        r.unique_diffs[0].kind,
        DiffKind::ErrorPath {
            new_status: PathStatus::Complete,
            old_status: PathStatus::OutOfBounds { field: "ring".into() }
        }
    );
    assert!(r.scenarios[0].stopped_paths.iter().any(|p| p.side == "old"));
}

#[test]
fn bound_exhaustion_is_reported() {
    let m = |bound: u32| {
        model(&format!(
            "model M {{ state {{ reg r : u8; }} handler mmio_write(offset : u8, value : u8) {{ \
             local i : u8; @unroll({bound}) while (i < value) {{ r = r + 1; i = i + 1; }} }} }}"
        ))
    };
    let r = pipeline(&m(2), &m(3));
    assert!(r
        .unique_diffs
        .iter()
        .any(|d| matches!(d.kind, DiffKind::ErrorPath { .. })));
    let stopped = &r.scenarios[0].stopped_paths;
    assert!(stopped
        .iter()
        .any(|p| p.status == PathStatus::BoundExhausted && p.side == "new"));
    assert!(stopped
        .iter()
        .any(|p| p.status == PathStatus::BoundExhausted && p.side == "old"));
}

#[test]
fn unknown_becomes_possible() {
    let m = |k: u32| {
        model(&format!(
            "model M {{ state {{ reg r : u32; }} handler mmio_write(offset : u32, value : u32) {{ r = value * {k}; }} }}"
        ))
    };
    let cfg = HarnessConfig {
        solver: SolverConfig {
            builtin_budget_bits: 8,
            ..SolverConfig::default()
        },
        ..HarnessConfig::default()
    };
    let plan = build_harness(m(3), m(5), &cfg).unwrap();
    let report = run_pipeline(&plan).unwrap();
    assert_eq!(report.verdict(), Verdict::PossibleOnly);
    let p = &report.pairs[0];
    assert!(p.unique_diffs.is_empty());
    assert_eq!(p.possible_diffs.len(), 1);
    assert_eq!(p.possible_diffs[0].certainty, Certainty::Possible);
    assert_eq!(p.raw_diffs, 0);
}

#[test]
fn confirmed_witnesses_replay() {
    let old = write_model("if (offset == 4) { ctrl = value; status = 1; } else { fire_interrupt(value); }");
    let new = write_model(
        "if (offset == 4) { ctrl = value + 1; } else { if (value == 3) { status = 2; } fire_interrupt(value); }",
    );
    let plan = build_harness(old, new, &HarnessConfig::default()).unwrap();
    let run = run_scenario(&plan, &plan.scenarios[0]).unwrap();
    assert!(!run.records.is_empty());
    for r in &run.records {
        assert_eq!(r.certainty, Certainty::Confirmed);
        let got = replay(&plan, &r.scenario, r.witness.as_ref().unwrap()).unwrap();
        assert!(got.contains(&r.kind), "{} not reproduced: {got:?}", r.kind);
    }
}

#[test]
fn report_json_shape() {
    let old = write_model("ctrl = value;");
    let new = write_model("ctrl = value | 1;");
    let plan = build_harness(old, new, &HarnessConfig::default()).unwrap();
    let mut report = run_pipeline(&plan).unwrap();
    report.zero_resources();
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let pair = &v["pairs"][0];
    for key in [
        "old",
        "new",
        "scenarios",
        "paths_new",
        "paths_old",
        "raw_diffs",
        "unique_diffs",
        "structural",
        "truncated",
        "wall_time_ms",
    ] {
        assert!(pair.get(key).is_some(), "missing {key}");
    }
    let d = &pair["unique_diffs"][0];
    for key in ["key", "kind", "certainty", "witness", "count"] {
        assert!(d.get(key).is_some(), "missing {key}");
    }
    assert_eq!(d["certainty"], "CONFIRMED");
    assert_eq!(d["key"], "mmio_write/STATE(ctrl[0])");
}
