//! The comparison pipeline: explore the new version, replay the old one
//! under each new path condition, look for divergences, deduplicate and
//! report.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::harness::{CompareSpec, HarnessPlan, Scenario, Side, StructuralNote};
use crate::interp::{run_concrete, ConcreteOutcome, EffectEvent, Explorer, InterpError, PathStatus, PathSummary};
use crate::solver::{SolveResult, Solver};
use crate::term::{self, eval, Assignment, PathCondition, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectDetail {
    LengthMismatch,
    KindMismatch,
    ArgMismatch,
}

impl fmt::Display for EffectDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectDetail::LengthMismatch => "length-mismatch",
            EffectDetail::KindMismatch => "kind-mismatch",
            EffectDetail::ArgMismatch => "arg-mismatch",
        })
    }
}

/// What diverged, including where. Two records with the same scenario and
/// kind count as the same unique difference.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiffKind {
    State {
        field: String,
        index: u32,
    },
    Return,
    Effect {
        position: usize,
        detail: EffectDetail,
    },
    ErrorPath {
        new_status: PathStatus,
        old_status: PathStatus,
    },
}

impl DiffKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DiffKind::State { .. } => "STATE",
            DiffKind::Return => "RETURN",
            DiffKind::Effect { .. } => "EFFECT",
            DiffKind::ErrorPath { .. } => "ERROR_PATH",
        }
    }

    pub fn location(&self) -> String {
        match self {
            DiffKind::State { field, index } => format!("{field}[{index}]"),
            DiffKind::Return => "return".into(),
            DiffKind::Effect { position, detail } => format!("#{position} {detail}"),
            DiffKind::ErrorPath { new_status, old_status } => {
                format!("new {new_status}, old {old_status}")
            }
        }
    }
}

impl fmt::Display for DiffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.tag(), self.location())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Certainty {
    Confirmed,
    Possible,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiffKey {
    pub scenario: String,
    pub kind: DiffKind,
}

impl fmt::Display for DiffKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scenario, self.kind)
    }
}

#[derive(Clone, Debug)]
pub struct DiffRecord {
    pub scenario: String,
    pub kind: DiffKind,
    pub certainty: Certainty,
    /// Present for confirmed records; satisfies both path conditions and
    /// the divergence.
    pub witness: Option<Assignment>,
    pub new_path_id: usize,
    pub old_path_id: usize,
    pub new_term: Option<Term>,
    pub old_term: Option<Term>,
    /// Why a record is only possible.
    pub reason: Option<String>,
}

impl DiffRecord {
    pub fn key(&self) -> DiffKey {
        DiffKey {
            scenario: self.scenario.clone(),
            kind: self.kind.clone(),
        }
    }
}

/// Witness with every variable of `terms` present, absent ones as 0.
fn complete(w: &Assignment, terms: &[&Term]) -> Assignment {
    let mut w = w.clone();
    for t in terms {
        for (n, _) in t.free_vars() {
            if w.get(&n).is_none() {
                w.set(n, 0);
            }
        }
    }
    w
}

struct PairCtx<'a> {
    scenario: &'a str,
    newp: &'a PathSummary,
    oldp: &'a PathSummary,
    phi: PathCondition,
    phi_witness: Option<Assignment>,
    solver: &'a Solver,
    out: Vec<DiffRecord>,
}

impl PairCtx<'_> {
    fn record(
        &mut self,
        kind: DiffKind,
        witness: Option<Assignment>,
        terms: (Option<&Term>, Option<&Term>),
        reason: Option<String>,
    ) {
        self.out.push(DiffRecord {
            scenario: self.scenario.to_string(),
            kind,
            certainty: if witness.is_some() {
                Certainty::Confirmed
            } else {
                Certainty::Possible
            },
            witness,
            new_path_id: self.newp.path_id,
            old_path_id: self.oldp.path_id,
            new_term: terms.0.cloned(),
            old_term: terms.1.cloned(),
            reason,
        });
    }

    /// A divergence that holds on the whole pair, such as a status or
    /// effect-length mismatch.
    fn structural(&mut self, kind: DiffKind) {
        let reason = self
            .phi_witness
            .is_none()
            .then(|| "solver returned unknown".to_string());
        self.record(kind, self.phi_witness.clone(), (None, None), reason);
    }

    /// Asks whether `cond` (a divergence) can hold together with Φ.
    fn query(&mut self, kind: DiffKind, cond: Term, terms: (Option<&Term>, Option<&Term>)) {
        if cond.is_false() {
            return;
        }
        match self.solver.solve(&self.phi.and(&cond)) {
            SolveResult::Unsat => {}
            SolveResult::Sat(w) => self.record(kind, Some(w), terms, None),
            SolveResult::Unknown(why) => {
                self.record(kind, None, terms, Some(format!("solver returned unknown: {why}")))
            }
        }
    }
}

/// All divergences between one new-version path and one guided
/// old-version path.
pub fn compare_pair(
    scenario: &str,
    newp: &PathSummary,
    oldp: &PathSummary,
    spec: &CompareSpec,
    solver: &Solver,
) -> Vec<DiffRecord> {
    let phi = newp.pc.and_all(&oldp.pc);
    let phi_witness = match solver.solve(&phi) {
        SolveResult::Unsat => return Vec::new(),
        SolveResult::Sat(w) => Some(w),
        SolveResult::Unknown(_) => None,
    };
    let mut cx = PairCtx {
        scenario,
        newp,
        oldp,
        phi,
        phi_witness,
        solver,
        out: Vec::new(),
    };
    if newp.status != oldp.status {
        cx.structural(DiffKind::ErrorPath {
            new_status: newp.status.clone(),
            old_status: oldp.status.clone(),
        });
        return cx.out;
    }
    if newp.status != PathStatus::Complete {
        return cx.out;
    }

    for field in &spec.state_fields {
        let (Some(nf), Some(of)) = (newp.final_state.field(field), oldp.final_state.field(field)) else {
            continue;
        };
        for (i, (a, b)) in nf.elems.iter().zip(&of.elems).enumerate() {
            if a == b {
                continue;
            }
            let kind = DiffKind::State {
                field: field.clone(),
                index: i as u32,
            };
            cx.query(kind, term::mk_ne(a, b), (Some(a), Some(b)));
        }
    }

    if spec.compare_return {
        if let (Some(a), Some(b)) = (&newp.return_term, &oldp.return_term) {
            if a.width() != b.width() {
                cx.structural(DiffKind::Return);
            } else if a != b {
                cx.query(DiffKind::Return, term::mk_ne(a, b), (Some(a), Some(b)));
            }
        }
    }

    if spec.compare_effects {
        compare_effects(&mut cx, &newp.effects, &oldp.effects);
    }
    cx.out
}

fn compare_effects(cx: &mut PairCtx, new: &[EffectEvent], old: &[EffectEvent]) {
    let common = new.len().min(old.len());
    for (position, (n, o)) in new.iter().zip(old).enumerate() {
        if n.kind.tag() != o.kind.tag() {
            cx.structural(DiffKind::Effect {
                position,
                detail: EffectDetail::KindMismatch,
            });
            continue;
        }
        let kind = DiffKind::Effect {
            position,
            detail: EffectDetail::ArgMismatch,
        };
        let (na, oa) = (n.kind.args(), o.kind.args());
        if na.iter().zip(&oa).any(|(a, b)| a.width() != b.width()) {
            cx.structural(kind);
            continue;
        }
        let mut differs = term::mk_false();
        for (a, b) in na.iter().zip(&oa) {
            if a != b {
                differs = term::mk_or(&differs, &term::mk_ne(a, b));
            }
        }
        cx.query(kind, differs, (None, None));
    }
    if new.len() != old.len() {
        cx.structural(DiffKind::Effect {
            position: common,
            detail: EffectDetail::LengthMismatch,
        });
    }
}

/// Divergences between two concrete runs, by the same rules as
/// [`compare_pair`].
pub fn compare_outcomes(spec: &CompareSpec, new: &ConcreteOutcome, old: &ConcreteOutcome) -> Vec<DiffKind> {
    let mut out = Vec::new();
    if new.status != old.status {
        out.push(DiffKind::ErrorPath {
            new_status: new.status.clone(),
            old_status: old.status.clone(),
        });
        return out;
    }
    if new.status != PathStatus::Complete {
        return out;
    }
    for field in &spec.state_fields {
        let (Some(a), Some(b)) = (new.state.get(field), old.state.get(field)) else {
            continue;
        };
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            if x != y {
                out.push(DiffKind::State {
                    field: field.clone(),
                    index: i as u32,
                });
            }
        }
    }
    if spec.compare_return {
        if let (Some(x), Some(y)) = (new.ret, old.ret) {
            if x != y {
                out.push(DiffKind::Return);
            }
        }
    }
    if spec.compare_effects {
        for (position, (n, o)) in new.effects.iter().zip(&old.effects).enumerate() {
            if n.kind != o.kind {
                out.push(DiffKind::Effect {
                    position,
                    detail: EffectDetail::KindMismatch,
                });
            } else if n.args != o.args {
                out.push(DiffKind::Effect {
                    position,
                    detail: EffectDetail::ArgMismatch,
                });
            }
        }
        if new.effects.len() != old.effects.len() {
            out.push(DiffKind::Effect {
                position: new.effects.len().min(old.effects.len()),
                detail: EffectDetail::LengthMismatch,
            });
        }
    }
    out
}

/// Runs both versions concretely on the inputs in `a` (absent variables
/// are 0) and returns the divergences.
pub fn replay(plan: &HarnessPlan, handler: &str, a: &Assignment) -> Result<Vec<DiffKind>, InterpError> {
    let run = |side| -> Result<ConcreteOutcome, InterpError> {
        let (state, args, dma) = plan
            .concrete_inputs(side, handler, a)
            .ok_or_else(|| InterpError::UnknownHandler(handler.to_string()))?;
        run_concrete(plan.model(side), handler, &state, &args, &dma, plan.budget.loop_bound)
    };
    let new = run(Side::New)?;
    let old = run(Side::Old)?;
    Ok(compare_outcomes(&plan.compare, &new, &old))
}

pub struct DedupGroup {
    pub key: DiffKey,
    pub representative: DiffRecord,
    pub count: usize,
}

/// Groups records by key in order of first appearance. The representative
/// is the confirmed record with the smallest (new, old) path ids, or the
/// smallest possible record if none is confirmed.
pub fn dedupe(records: &[DiffRecord]) -> Vec<DedupGroup> {
    let mut index: HashMap<DiffKey, usize> = HashMap::new();
    let mut groups: Vec<DedupGroup> = Vec::new();
    let rank = |r: &DiffRecord| (r.certainty, r.new_path_id, r.old_path_id);
    for r in records {
        let key = r.key();
        match index.get(&key) {
            Some(&g) => {
                let g = &mut groups[g];
                g.count += 1;
                if rank(r) < rank(&g.representative) {
                    g.representative = r.clone();
                }
            }
            None => {
                index.insert(key.clone(), groups.len());
                groups.push(DedupGroup {
                    key,
                    representative: r.clone(),
                    count: 1,
                });
            }
        }
    }
    groups
}

#[derive(Clone, Debug, Serialize)]
pub struct UniqueDiff {
    pub key: String,
    pub scenario: String,
    pub kind: DiffKind,
    pub location: String,
    pub certainty: Certainty,
    pub witness: Option<Assignment>,
    pub count: usize,
    pub new_path_id: usize,
    pub old_path_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_value: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old_value: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_term: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old_term: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl UniqueDiff {
    fn from_group(g: &DedupGroup) -> Self {
        let r = &g.representative;
        let value = |t: &Option<Term>| -> Option<u64> {
            let (t, w) = (t.as_ref()?, r.witness.as_ref()?);
            eval(t, &complete(w, &[t])).ok()
        };
        UniqueDiff {
            key: g.key.to_string(),
            scenario: r.scenario.clone(),
            kind: r.kind.clone(),
            location: r.kind.location(),
            certainty: r.certainty,
            witness: r.witness.clone(),
            count: g.count,
            new_path_id: r.new_path_id,
            old_path_id: r.old_path_id,
            new_value: value(&r.new_term),
            old_value: value(&r.old_term),
            new_term: r.new_term.as_ref().map(Term::to_string),
            old_term: r.old_term.as_ref().map(Term::to_string),
            reason: r.reason.clone(),
        }
    }
}

/// A path that stopped early, listed so it is never lost silently.
#[derive(Clone, Debug, Serialize)]
pub struct TerminalPath {
    pub side: &'static str,
    /// For old-version paths, the new-version path that guided them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guide_path_id: Option<usize>,
    pub path_id: usize,
    pub status: PathStatus,
    pub pc: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub handler: String,
    pub kind: &'static str,
    pub present_in: crate::harness::Presence,
    pub executed: bool,
    pub paths_new: usize,
    pub paths_old: usize,
    pub raw_diffs: usize,
    pub unique_diffs: usize,
    pub possible_diffs: usize,
    pub truncated: bool,
    pub unknown_paths: usize,
    pub stopped_paths: Vec<TerminalPath>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub old: String,
    pub new: String,
    pub scenarios: Vec<ScenarioReport>,
    pub paths_new: usize,
    pub paths_old: usize,
    pub raw_diffs: usize,
    pub unique_diff_count: usize,
    pub unique_diffs: Vec<UniqueDiff>,
    pub possible_diffs: Vec<UniqueDiff>,
    pub structural: Vec<StructuralNote>,
    pub truncated: bool,
    /// Confirmed records whose witness did not reproduce under concrete
    /// replay; they are demoted to possible.
    pub replay_failures: usize,
    pub wall_time_ms: u64,
    pub peak_memory_mb: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub pairs: Vec<PairReport>,
}

/// Overall verdict, in increasing order of severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verdict {
    Clean,
    Truncated,
    PossibleOnly,
    Differences,
}

impl Report {
    pub fn verdict(&self) -> Verdict {
        let mut v = Verdict::Clean;
        for p in &self.pairs {
            let this = if !p.unique_diffs.is_empty() || !p.structural.is_empty() {
                Verdict::Differences
            } else if !p.possible_diffs.is_empty() {
                Verdict::PossibleOnly
            } else if p.truncated {
                Verdict::Truncated
            } else {
                Verdict::Clean
            };
            v = v.max(this);
        }
        v
    }

    /// Zeroes timing and memory figures so reports compare byte for byte.
    pub fn zero_resources(&mut self) {
        for p in &mut self.pairs {
            p.wall_time_ms = 0;
            p.peak_memory_mb = 0.0;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Peak resident set size of this process, from `/proc`, if available.
pub fn peak_memory_mb() -> f64 {
    std::fs::read_to_string("/proc/self/status")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("VmHWM:"))
                .and_then(|l| l.split_whitespace().nth(1))
                .and_then(|kb| kb.parse::<f64>().ok())
        })
        .map(|kb| (kb / 1024.0 * 10.0).round() / 10.0)
        .unwrap_or(0.0)
}

/// Everything one scenario produced.
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub records: Vec<DiffRecord>,
    pub new_paths: Vec<PathSummary>,
    /// Guided old-version paths, per new path.
    pub old_paths: Vec<Vec<PathSummary>>,
}

pub fn run_scenario(plan: &HarnessPlan, sc: &Scenario) -> Result<ScenarioRun, InterpError> {
    let mut report = ScenarioReport {
        handler: sc.handler.clone(),
        kind: sc.kind.as_str(),
        present_in: sc.present_in,
        executed: sc.runnable(),
        paths_new: 0,
        paths_old: 0,
        raw_diffs: 0,
        unique_diffs: 0,
        possible_diffs: 0,
        truncated: false,
        unknown_paths: 0,
        stopped_paths: Vec::new(),
    };
    if !sc.runnable() {
        return Ok(ScenarioRun {
            report,
            records: Vec::new(),
            new_paths: Vec::new(),
            old_paths: Vec::new(),
        });
    }
    let solver = Solver::new(plan.solver.clone());
    let (args, assume) = plan.request(&sc.handler).expect("runnable scenario has a handler");
    let env_new = plan.env(Side::New);
    let env_old = plan.env(Side::Old);
    let explorer_new = Explorer {
        model: &plan.new,
        budget: plan.budget,
        solver: &solver,
    };
    let explorer_old = Explorer {
        model: &plan.old,
        budget: plan.budget,
        solver: &solver,
    };
    let new = explorer_new.explore(&sc.handler, &env_new, &args, &PathCondition::new(), &assume)?;

    let per_path: Vec<(crate::interp::Exploration, Vec<DiffRecord>)> = new
        .summaries
        .par_iter()
        .map(|np| {
            let old = explorer_old.explore(&sc.handler, &env_old, &args, &np.pc, &assume)?;
            let records = old
                .summaries
                .iter()
                .flat_map(|op| compare_pair(&sc.handler, np, op, &plan.compare, &solver))
                .collect();
            Ok((old, records))
        })
        .collect::<Result<_, InterpError>>()?;

    report.paths_new = new.summaries.len();
    report.truncated = new.truncated;
    let mut records = Vec::new();
    let mut old_paths = Vec::with_capacity(per_path.len());
    for np in &new.summaries {
        report.unknown_paths += np.unknown as usize;
        if np.status != PathStatus::Complete {
            report.stopped_paths.push(TerminalPath {
                side: "new",
                guide_path_id: None,
                path_id: np.path_id,
                status: np.status.clone(),
                pc: np.pc.to_string(),
            });
        }
    }
    for (np, (old, recs)) in new.summaries.iter().zip(per_path) {
        report.paths_old += old.summaries.len();
        report.truncated |= old.truncated;
        for op in &old.summaries {
            report.unknown_paths += op.unknown as usize;
            if op.status != PathStatus::Complete {
                report.stopped_paths.push(TerminalPath {
                    side: "old",
                    guide_path_id: Some(np.path_id),
                    path_id: op.path_id,
                    status: op.status.clone(),
                    pc: op.pc.to_string(),
                });
            }
        }
        records.extend(recs);
        old_paths.push(old.summaries);
    }
    Ok(ScenarioRun {
        report,
        records,
        new_paths: new.summaries,
        old_paths,
    })
}

fn label(m: &crate::dsl::ValidatedModel) -> String {
    if m.version_tag() == m.name() {
        m.name().to_string()
    } else {
        format!("{}@{}", m.name(), m.version_tag())
    }
}

/// Runs every scenario of `plan` and assembles the report for the pair.
pub fn run_pipeline(plan: &HarnessPlan) -> Result<Report, InterpError> {
    let start = Instant::now();
    let runs: Vec<ScenarioRun> = plan
        .scenarios
        .par_iter()
        .map(|sc| run_scenario(plan, sc))
        .collect::<Result<_, _>>()?;

    let mut scenarios = Vec::new();
    let mut all = Vec::new();
    let mut replay_failures = 0;
    for mut run in runs {
        for r in &mut run.records {
            if r.certainty != Certainty::Confirmed {
                continue;
            }
            let w = r.witness.as_ref().expect("confirmed records carry a witness");
            let reproduced = replay(plan, &r.scenario, w)?.contains(&r.kind);
            if !reproduced {
                replay_failures += 1;
                r.certainty = Certainty::Possible;
                r.reason = Some("witness did not reproduce under concrete replay".into());
            }
        }
        let groups = dedupe(&run.records);
        run.report.raw_diffs = run
            .records
            .iter()
            .filter(|r| r.certainty == Certainty::Confirmed)
            .count();
        run.report.unique_diffs = groups
            .iter()
            .filter(|g| g.representative.certainty == Certainty::Confirmed)
            .count();
        run.report.possible_diffs = groups.len() - run.report.unique_diffs;
        scenarios.push(run.report);
        all.extend(run.records);
    }
    let groups = dedupe(&all);
    let (confirmed, possible): (Vec<_>, Vec<_>) = groups
        .iter()
        .partition(|g| g.representative.certainty == Certainty::Confirmed);
    let unique_diffs: Vec<UniqueDiff> = confirmed.into_iter().map(UniqueDiff::from_group).collect();
    let pair = PairReport {
        old: label(&plan.old),
        new: label(&plan.new),
        paths_new: scenarios.iter().map(|s| s.paths_new).sum(),
        paths_old: scenarios.iter().map(|s| s.paths_old).sum(),
        raw_diffs: scenarios.iter().map(|s| s.raw_diffs).sum(),
        truncated: scenarios.iter().any(|s| s.truncated),
        unique_diff_count: unique_diffs.len(),
        unique_diffs,
        possible_diffs: possible.into_iter().map(UniqueDiff::from_group).collect(),
        structural: plan.structural.clone(),
        scenarios,
        replay_failures,
        wall_time_ms: start.elapsed().as_millis() as u64,
        peak_memory_mb: peak_memory_mb(),
    };
    Ok(Report { pairs: vec![pair] })
}

#[cfg(test)]
mod tests;
