//! One pass/fail line per acceptance criterion. Exits non-zero if any fail.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Instant;

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use serde_json::Value;
use vpdiff_core::diffcheck::run_scenario;
use vpdiff_core::oracle::terms::{arb_path_condition, check_operator, Op};
use vpdiff_core::oracle::{exhaustive_diffs, guided_violations, input_space, partition_violations, MAX_BITS};
use vpdiff_core::{
    build_harness, load_model, run_pipeline, Certainty, DiffKind, ExploreBudget, HarnessConfig, HarnessPlan,
    PathCondition, PathStatus, SolveResult, Solver, SolverConfig, SourceUnit, ValidatedModel,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const PAIRS: &[(&str, &str)] = &[
    ("minidev_v1", "minidev_v2"),
    ("uart_v1", "uart_v2"),
    ("counter_v1", "counter_v2"),
    ("e1000_v1", "e1000_v2"),
    ("e1000_v2", "e1000_v3"),
    ("e1000_v1", "e1000_v3"),
];

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model_path(name: &str) -> String {
    models_dir().join(format!("{name}.dm")).display().to_string()
}

fn bundled() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(models_dir())
        .expect("models directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "dm"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn load(name: &str) -> Arc<ValidatedModel> {
    let path = model_path(name);
    let text = std::fs::read_to_string(&path).expect("bundled model");
    Arc::new(
        load_model(&SourceUnit::new(&path, text), ExploreBudget::default().loop_bound).expect("bundled model loads"),
    )
}

fn plan(old: &str, new: &str) -> HarnessPlan {
    build_harness(load(old), load(new), &HarnessConfig::default()).expect("harness")
}

/// Every pair worth checking exhaustively: the version pairs plus each
/// model against itself.
fn all_plans() -> Vec<(String, HarnessPlan)> {
    let mut out: Vec<(String, HarnessPlan)> = PAIRS.iter().map(|(a, b)| (format!("{a}->{b}"), plan(a, b))).collect();
    for m in bundled() {
        out.push((format!("{m}->{m}"), plan(&m, &m)));
    }
    out
}

fn vpdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpdiff"))
        .args(args)
        .output()
        .expect("run vpdiff")
}

fn check_json(old: &str, new: &str, extra: &[&str]) -> (Output, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (o, n, j) = (model_path(old), model_path(new), out.display().to_string());
    let mut args = vec!["check", o.as_str(), n.as_str(), "--json", j.as_str()];
    args.extend_from_slice(extra);
    let run = vpdiff(&args);
    let json = std::fs::read_to_string(&out).unwrap_or_default();
    (run, json)
}

fn reflexivity() -> Outcome {
    let start = Instant::now();
    let models = bundled();
    if models.len() < 5
        || !models.iter().any(|m| m.starts_with("minidev"))
        || !models.iter().any(|m| m.starts_with("e1000"))
    {
        return Err(format!("bundled models incomplete: {models:?}"));
    }
    for m in &models {
        let (run, json) = check_json(m, m, &[]);
        if run.status.code() != Some(0) {
            return Err(format!("{m}: exit {:?}", run.status.code()));
        }
        let v: Value = serde_json::from_str(&json).map_err(|e| format!("{m}: {e}"))?;
        for p in v["pairs"].as_array().unwrap() {
            if p["unique_diff_count"] != 0 || !p["possible_diffs"].as_array().unwrap().is_empty() {
                return Err(format!("{m}: reports differences against itself"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("{} models, {secs:.2} s", models.len()))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut skipped = 0;
    for (old, new) in PAIRS {
        let plan = plan(old, new);
        let report = run_pipeline(&plan).map_err(|e| e.to_string())?;
        let pair = &report.pairs[0];
        for sc in &plan.scenarios {
            let Some(space) = input_space(&plan, sc, MAX_BITS) else {
                skipped += 1;
                continue;
            };
            let of_scenario = |d: &&vpdiff_core::UniqueDiff| d.scenario == sc.handler;
            if let Some(d) = pair.possible_diffs.iter().find(of_scenario) {
                return Err(format!("{old}->{new}: possible diff {}", d.key));
            }
            let got: BTreeSet<DiffKind> = pair
                .unique_diffs
                .iter()
                .filter(of_scenario)
                .filter(|d| d.certainty == Certainty::Confirmed)
                .map(|d| d.kind.clone())
                .collect();
            let want = exhaustive_diffs(&plan, sc, &space);
            if got != want {
                return Err(format!(
                    "{old}->{new} {}: pipeline {got:?}, exhaustive {want:?}",
                    sc.handler
                ));
            }
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!(
        "{checked} scenarios matched, {skipped} over 16 bits or using DMA, {secs:.2} s"
    ))
}

fn witness_self_check() -> Outcome {
    let mut confirmed = 0;
    for (name, plan) in all_plans() {
        for sc in &plan.scenarios {
            let run = run_scenario(&plan, sc).map_err(|e| e.to_string())?;
            for r in run.records.iter().filter(|r| r.certainty == Certainty::Confirmed) {
                let w = r
                    .witness
                    .as_ref()
                    .ok_or(format!("{name}: confirmed record without witness"))?;
                let kinds = vpdiff_core::replay(&plan, &r.scenario, w).map_err(|e| e.to_string())?;
                if !kinds.contains(&r.kind) {
                    return Err(format!("{name}: {} does not replay under {w}", r.kind));
                }
                confirmed += 1;
            }
        }
        let report = run_pipeline(&plan).map_err(|e| e.to_string())?;
        if report.pairs[0].replay_failures > 0 {
            return Err(format!("{name}: {} replay failures", report.pairs[0].replay_failures));
        }
    }
    if confirmed == 0 {
        return Err("no confirmed records to check".into());
    }
    Ok(format!("{confirmed} confirmed records replayed"))
}

fn path_partition() -> Outcome {
    let mut handlers = 0;
    let mut inputs_checked = 0;
    for m in bundled() {
        let plan = plan(&m, &m);
        for sc in &plan.scenarios {
            let Some(space) = input_space(&plan, sc, MAX_BITS) else {
                continue;
            };
            let inputs = space.inputs();
            let run = run_scenario(&plan, sc).map_err(|e| e.to_string())?;
            let v = partition_violations(&run.new_paths, &PathCondition::new(), &inputs);
            if let Some(first) = v.first() {
                return Err(format!("{m} {}: {} violations, e.g. {first}", sc.handler, v.len()));
            }
            handlers += 1;
            inputs_checked += inputs.len();
        }
    }
    Ok(format!("{handlers} handlers, {inputs_checked} inputs, 0 violations"))
}

fn guided_soundness() -> Outcome {
    let solver = Solver::new(SolverConfig::default());
    let mut guides = 0;
    for (name, plan) in all_plans() {
        for sc in &plan.scenarios {
            if !sc.runnable() {
                continue;
            }
            let run = run_scenario(&plan, sc).map_err(|e| e.to_string())?;
            for (np, guided) in run.new_paths.iter().zip(&run.old_paths) {
                for g in guided {
                    if solver.solve(&np.pc.and_all(&g.pc)) == SolveResult::Unsat {
                        return Err(format!(
                            "{name} {}: guided path {} is disjoint from new path {}",
                            sc.handler, g.path_id, np.path_id
                        ));
                    }
                }
            }
            let Some(space) = input_space(&plan, sc, MAX_BITS) else {
                continue;
            };
            let inputs = space.inputs();
            for (np, guided) in run.new_paths.iter().zip(&run.old_paths) {
                let v = guided_violations(np, guided, &inputs);
                if let Some(first) = v.first() {
                    return Err(format!("{name} {}: {first}", sc.handler));
                }
                guides += 1;
            }
        }
    }
    Ok(format!("{guides} new paths enumerated, 0 violations"))
}

fn simplifier_soundness() -> Outcome {
    const CASES: u32 = 10_000;
    let ops = Op::all();
    for op in &ops {
        check_operator(*op, CASES).map_err(|e| format!("{op:?}: {e}"))?;
    }
    Ok(format!("{} operators x {CASES} cases", ops.len()))
}

fn backend_agreement() -> Outcome {
    let external = SolverConfig::external("z3 -in");
    let Some(cmd) = external.resolved_external_cmd() else {
        return Ok("skipped: no external solver configured".into());
    };
    let ext = Solver::new(external);
    let probe = PathCondition::new().and(&vpdiff_core::term::mk_eq(
        &vpdiff_core::term::mk_var("probe", 8),
        &vpdiff_core::term::mk_const(8, 3),
    ));
    if let SolveResult::Unknown(why) = ext.solve(&probe) {
        return Ok(format!("skipped: external solver `{cmd}` unavailable ({why})"));
    }
    let builtin = Solver::new(SolverConfig::default());
    let mut runner = TestRunner::deterministic();
    let strategy = arb_path_condition();
    let (mut sat, mut unsat, mut unknown) = (0, 0, 0);
    for _ in 0..500 {
        let pc = strategy.new_tree(&mut runner).unwrap().current();
        let bits: u32 = pc.free_vars().values().sum();
        if bits > MAX_BITS {
            return Err(format!("generated {bits}-bit condition"));
        }
        let (b, e) = (builtin.solve(&pc), ext.solve(&pc));
        match (&b, &e) {
            (SolveResult::Sat(_), SolveResult::Sat(_)) => sat += 1,
            (SolveResult::Unsat, SolveResult::Unsat) => unsat += 1,
            (SolveResult::Unknown(_), _) => return Err(format!("builtin unknown on {pc}")),
            (_, SolveResult::Unknown(_)) => unknown += 1,
            _ => return Err(format!("{pc}: builtin {b:?}, external {e:?}")),
        }
    }
    if unknown > 0 {
        return Err(format!("external solver returned unknown {unknown} times"));
    }
    Ok(format!(
        "500 conditions against `{cmd}`: {sat} sat, {unsat} unsat, all agree"
    ))
}

fn strip_resources(json: &str) -> Value {
    let mut v: Value = serde_json::from_str(json).expect("report JSON");
    for p in v["pairs"].as_array_mut().unwrap() {
        let p = p.as_object_mut().unwrap();
        p.remove("wall_time_ms");
        p.remove("peak_memory_mb");
    }
    v
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for (old, new) in PAIRS {
        let (_, a) = check_json(old, new, &["--seed-report"]);
        let (_, b) = check_json(old, new, &["--seed-report"]);
        if a.is_empty() || a != b {
            return Err(format!("{old}->{new}: seeded reports differ"));
        }
        let (_, c) = check_json(old, new, &[]);
        let (_, d) = check_json(old, new, &[]);
        if strip_resources(&c) != strip_resources(&d) || strip_resources(&c) != strip_resources(&a) {
            return Err(format!("{old}->{new}: reports differ beyond wall time and memory"));
        }
        compared += 1;
    }
    Ok(format!(
        "{compared} pairs byte-identical with --seed-report, equal modulo resources without"
    ))
}

fn loop_safety() -> Outcome {
    let src = "model L { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { \
               local i : u8; @elide while (i < value) { i = i + 1; r = i; } } }";
    match load_model(&SourceUnit::new("elide.dm", src), 4) {
        Ok(_) => return Err("elided loop writing state was accepted".into()),
        Err(e) if e.to_string().contains("elided loop writes state field r") => {}
        Err(e) => return Err(format!("wrong rejection: {e}")),
    }

    let plan = plan("counter_v1", "counter_v2");
    let report = run_pipeline(&plan).map_err(|e| e.to_string())?;
    let pair = &report.pairs[0];
    for sc in &plan.scenarios {
        let run = run_scenario(&plan, sc).map_err(|e| e.to_string())?;
        let exhausted = run
            .new_paths
            .iter()
            .filter(|p| p.status == PathStatus::BoundExhausted)
            .count()
            + run
                .old_paths
                .iter()
                .flatten()
                .filter(|p| p.status == PathStatus::BoundExhausted)
                .count();
        let listed = pair
            .scenarios
            .iter()
            .filter(|s| s.handler == sc.handler)
            .flat_map(|s| &s.stopped_paths)
            .filter(|t| t.status == PathStatus::BoundExhausted)
            .count();
        if exhausted != listed {
            return Err(format!(
                "{}: {exhausted} bound-exhausted paths, {listed} reported",
                sc.handler
            ));
        }
    }
    let error_path = pair.unique_diffs.iter().any(|d| {
        matches!(&d.kind, DiffKind::ErrorPath { new_status, old_status }
            if *new_status == PathStatus::BoundExhausted || *old_status == PathStatus::BoundExhausted)
    });
    if !error_path {
        return Err("counter pair reports no ERROR_PATH for the exhausted bound".into());
    }
    let (_, json) = check_json("counter_v1", "counter_v2", &[]);
    if !json.contains("BOUND_EXHAUSTED") || !json.contains("ERROR_PATH") {
        return Err("JSON report omits BOUND_EXHAUSTED or ERROR_PATH".into());
    }
    Ok("@elide writing state rejected; every exhausted path reported, ERROR_PATH present".into())
}

fn report_shape() -> Outcome {
    let (run, json) = check_json("e1000_v1", "e1000_v2", &[]);
    let v: Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    for key in [
        "paths_new",
        "paths_old",
        "unique_diff_count",
        "wall_time_ms",
        "peak_memory_mb",
    ] {
        if !v["pairs"][0][key].is_number() {
            return Err(format!("JSON pair lacks numeric {key}"));
        }
    }
    let text = String::from_utf8_lossy(&run.stdout);
    for needle in ["# paths new", "# paths old", "# diffs", "wall time"] {
        if !text.contains(needle) {
            return Err(format!("text report lacks {needle:?}"));
        }
    }
    Ok("paths, differences and wall time in JSON and text".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("reflexivity", reflexivity),
        ("oracle equivalence", oracle_equivalence),
        ("witness self-check", witness_self_check),
        ("path partition", path_partition),
        ("guided soundness and completeness", guided_soundness),
        ("simplifier soundness", simplifier_soundness),
        ("backend agreement", backend_agreement),
        ("determinism", determinism),
        ("loop safety", loop_safety),
        ("report shape", report_shape),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
