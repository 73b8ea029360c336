//! Pairs two model versions into comparison scenarios.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::ir::{FieldInfo, HandlerIr, HandlerKind};
use crate::dsl::ValidatedModel;
use crate::interp::{
    init_env_with, request_args, request_assumptions, Arg, ConcreteArg, ConcreteState, DmaOracle, ExploreBudget,
    SymbolicEnv,
};
use crate::solver::SolverConfig;
use crate::term::{Assignment, PathCondition};

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandlerFilter {
    /// When present, only these handlers are considered.
    pub include: Option<Vec<String>>,
    pub exclude: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// When present, only these fields are compared.
    pub fields: Option<Vec<String>>,
    pub exclude_fields: Vec<String>,
    #[serde(rename = "return")]
    pub compare_return: bool,
    pub effects: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            fields: None,
            exclude_fields: Vec::new(),
            compare_return: true,
            effects: true,
        }
    }
}

/// The JSON config document. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub handlers: HandlerFilter,
    pub compare: CompareConfig,
    pub budget: ExploreBudget,
    pub solver: SolverConfig,
}

impl HarnessConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Both,
    OldOnly,
    NewOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub handler: String,
    pub kind: HandlerKind,
    pub present_in: Presence,
    /// Symbolic request variables as (name, width).
    pub request_vars: Vec<(String, u32)>,
    /// Same name in both versions but different parameters or return width.
    pub signature_mismatch: bool,
}

impl Scenario {
    pub fn runnable(&self) -> bool {
        self.present_in == Presence::Both && !self.signature_mismatch
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompareSpec {
    pub state_fields: Vec<String>,
    pub compare_return: bool,
    pub compare_effects: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralKind {
    HandlerOnlyInOld,
    HandlerOnlyInNew,
    HandlerSignature,
    FieldOnlyInOld,
    FieldOnlyInNew,
    FieldWidth,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StructuralNote {
    pub kind: StructuralKind,
    pub subject: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("incompatible models: {0}")]
    IncompatibleModels(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Old,
    New,
}

#[derive(Clone, Debug)]
pub struct HarnessPlan {
    pub old: Arc<ValidatedModel>,
    pub new: Arc<ValidatedModel>,
    pub scenarios: Vec<Scenario>,
    pub compare: CompareSpec,
    pub budget: ExploreBudget,
    pub solver: SolverConfig,
    pub structural: Vec<StructuralNote>,
    /// Shared field names whose widths differ; each version gets its own
    /// initial variables for these.
    pub private_fields: BTreeSet<String>,
}

/// Parameters as (name, width, array length).
type Params = Vec<(String, u32, Option<u32>)>;

fn signature(h: &HandlerIr) -> (HandlerKind, Params, Option<u32>) {
    (
        h.kind,
        h.params.iter().map(|p| (p.name.clone(), p.width, p.len)).collect(),
        h.return_width,
    )
}

fn describe_sig(h: &HandlerIr) -> String {
    let ps: Vec<String> = h
        .params
        .iter()
        .map(|p| match p.len {
            Some(n) => format!("{}[{n}] : u{}", p.name, p.width),
            None => format!("{} : u{}", p.name, p.width),
        })
        .collect();
    match h.return_width {
        Some(w) => format!("({}) -> u{w}", ps.join(", ")),
        None => format!("({})", ps.join(", ")),
    }
}

pub fn build_harness(
    old: Arc<ValidatedModel>,
    new: Arc<ValidatedModel>,
    cfg: &HarnessConfig,
) -> Result<HarnessPlan, HarnessError> {
    let mut structural = Vec::new();

    // Fields.
    let old_fields: BTreeMap<&str, &FieldInfo> = old.fields().iter().map(|f| (f.name.as_str(), f)).collect();
    let new_fields: BTreeMap<&str, &FieldInfo> = new.fields().iter().map(|f| (f.name.as_str(), f)).collect();
    let mut comparable = Vec::new();
    let mut private_fields = BTreeSet::new();
    for f in new.fields() {
        match old_fields.get(f.name.as_str()) {
            None => structural.push(StructuralNote {
                kind: StructuralKind::FieldOnlyInNew,
                subject: f.name.clone(),
                detail: format!("field {} is declared only in the new version", f.name),
            }),
            Some(o) if o.width != f.width || o.len != f.len => {
                private_fields.insert(f.name.clone());
                structural.push(StructuralNote {
                    kind: StructuralKind::FieldWidth,
                    subject: f.name.clone(),
                    detail: format!(
                        "field {} is u{} x{} in old and u{} x{} in new",
                        f.name, o.width, o.len, f.width, f.len
                    ),
                });
            }
            Some(_) => comparable.push(f.name.clone()),
        }
    }
    for f in old.fields() {
        if !new_fields.contains_key(f.name.as_str()) {
            structural.push(StructuralNote {
                kind: StructuralKind::FieldOnlyInOld,
                subject: f.name.clone(),
                detail: format!("field {} is declared only in the old version", f.name),
            });
        }
    }
    if comparable.is_empty() {
        return Err(HarnessError::IncompatibleModels(
            "the versions share no state field of equal shape".into(),
        ));
    }

    let all_fields: BTreeSet<&str> = old_fields.keys().chain(new_fields.keys()).copied().collect();
    let named_fields = cfg.compare.fields.iter().flatten().chain(&cfg.compare.exclude_fields);
    for f in named_fields {
        if !all_fields.contains(f.as_str()) {
            return Err(HarnessError::Config(format!("unknown field {f}")));
        }
    }
    let state_fields: Vec<String> = match &cfg.compare.fields {
        Some(list) => {
            for f in list {
                if !comparable.contains(f) {
                    return Err(HarnessError::Config(format!(
                        "field {f} is not declared with the same shape in both versions"
                    )));
                }
            }
            comparable.iter().filter(|f| list.contains(f)).cloned().collect()
        }
        None => comparable,
    };
    let state_fields = state_fields
        .into_iter()
        .filter(|f| !cfg.compare.exclude_fields.contains(f))
        .collect();

    // Handlers, in new-version order followed by old-only handlers.
    let mut names: Vec<&str> = new.handlers().iter().map(|h| h.name.as_str()).collect();
    for h in old.handlers() {
        if new.handler(&h.name).is_none() {
            names.push(&h.name);
        }
    }
    for n in cfg.handlers.include.iter().flatten().chain(&cfg.handlers.exclude) {
        if !names.contains(&n.as_str()) {
            return Err(HarnessError::Config(format!("unknown handler {n}")));
        }
    }
    let mut scenarios = Vec::new();
    for name in names {
        if let Some(inc) = &cfg.handlers.include {
            if !inc.iter().any(|n| n == name) {
                continue;
            }
        }
        if cfg.handlers.exclude.iter().any(|n| n == name) {
            continue;
        }
        let (o, n) = (old.handler(name), new.handler(name));
        let (present_in, h) = match (o, n) {
            (Some(_), Some(h)) => (Presence::Both, h),
            (None, Some(h)) => {
                structural.push(StructuralNote {
                    kind: StructuralKind::HandlerOnlyInNew,
                    subject: name.to_string(),
                    detail: format!("handler {name} exists only in the new version"),
                });
                (Presence::NewOnly, h)
            }
            (Some(h), None) => {
                structural.push(StructuralNote {
                    kind: StructuralKind::HandlerOnlyInOld,
                    subject: name.to_string(),
                    detail: format!("handler {name} exists only in the old version"),
                });
                (Presence::OldOnly, h)
            }
            (None, None) => unreachable!(),
        };
        let signature_mismatch = match (o, n) {
            (Some(o), Some(n)) if signature(o) != signature(n) => {
                structural.push(StructuralNote {
                    kind: StructuralKind::HandlerSignature,
                    subject: name.to_string(),
                    detail: format!(
                        "handler {name} changed signature from {} to {}",
                        describe_sig(o),
                        describe_sig(n)
                    ),
                });
                true
            }
            _ => false,
        };
        let request_vars = request_args(h)
            .iter()
            .flat_map(|a| match a {
                Arg::Scalar(t) => vec![t.clone()],
                Arg::Array(v) => v.clone(),
            })
            .map(|t| (t.as_var().unwrap_or_default().to_string(), t.width()))
            .collect();
        scenarios.push(Scenario {
            handler: name.to_string(),
            kind: h.kind,
            present_in,
            request_vars,
            signature_mismatch,
        });
    }
    if scenarios.is_empty() {
        return Err(HarnessError::Config("the handler filter selects no handler".into()));
    }
    if cfg.budget.max_paths == 0 || cfg.budget.max_steps_per_path == 0 || cfg.budget.loop_bound == 0 {
        return Err(HarnessError::Config("budget values must be at least 1".into()));
    }
    if cfg.solver.builtin_budget_bits == 0 || cfg.solver.timeout_ms == 0 {
        return Err(HarnessError::Config(
            "solver budget and timeout must be at least 1".into(),
        ));
    }

    Ok(HarnessPlan {
        old,
        new,
        scenarios,
        compare: CompareSpec {
            state_fields,
            compare_return: cfg.compare.compare_return,
            compare_effects: cfg.compare.effects,
        },
        budget: cfg.budget,
        solver: cfg.solver.clone(),
        structural,
        private_fields,
    })
}

impl HarnessPlan {
    pub fn model(&self, side: Side) -> &ValidatedModel {
        match side {
            Side::Old => &self.old,
            Side::New => &self.new,
        }
    }

    fn state_prefix(&self, side: Side, f: &FieldInfo) -> String {
        match (self.private_fields.contains(&f.name), side) {
            (false, _) => "state".into(),
            (true, Side::Old) => "old.state".into(),
            (true, Side::New) => "new.state".into(),
        }
    }

    /// Initial symbolic state for one version. Fields of equal shape in
    /// both versions share their variables.
    pub fn env(&self, side: Side) -> SymbolicEnv {
        init_env_with(self.model(side), |f| self.state_prefix(side, f))
    }

    /// Shared request arguments and standing assumptions for a scenario.
    pub fn request(&self, handler: &str) -> Option<(Vec<Arg>, PathCondition)> {
        let h = self.new.handler(handler).or_else(|| self.old.handler(handler))?;
        let args = request_args(h);
        let assume = request_assumptions(h, &args);
        Some((args, assume))
    }

    /// Concrete inputs for one version, read from `a`. Variables `a` does
    /// not mention are taken as 0.
    pub fn concrete_inputs(
        &self,
        side: Side,
        handler: &str,
        a: &Assignment,
    ) -> Option<(ConcreteState, Vec<ConcreteArg>, DmaOracle)> {
        let env = self.env(side);
        let state = env
            .fields()
            .iter()
            .map(|f| {
                let vals = f
                    .elems
                    .iter()
                    .map(|t| a.value_or_zero(t.as_var().expect("initial state is variables")))
                    .collect();
                (f.name.clone(), vals)
            })
            .collect();
        let h = self.model(side).handler(handler)?;
        let args = request_args(h)
            .iter()
            .map(|arg| match arg {
                Arg::Scalar(t) => ConcreteArg::Scalar(a.value_or_zero(t.as_var().unwrap_or_default())),
                Arg::Array(v) => ConcreteArg::Array(
                    v.iter()
                        .map(|t| a.value_or_zero(t.as_var().unwrap_or_default()))
                        .collect(),
                ),
            })
            .collect();
        Some((state, args, DmaOracle::from_assignment(handler, a)))
    }
}
