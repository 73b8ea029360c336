//! Symbolic and concrete execution of validated handlers.

mod concrete;
mod symbolic;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::ir::{FieldInfo, HandlerIr, HandlerKind};
use crate::dsl::ValidatedModel;
use crate::term::{self, eval, Assignment, EvalError, PathCondition, Term};

pub use concrete::{run_concrete, ConcreteArg, ConcreteEffect, ConcreteOutcome, ConcreteState, DmaOracle};
pub use symbolic::{run_guided, run_handler, Explorer};

/// Where an input variable comes from. Each origin maps to exactly one
/// variable name, and the mapping does not depend on the model version.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarOrigin {
    StateField {
        field: String,
        index: u32,
    },
    RequestParam {
        handler: String,
        param: String,
    },
    RequestElem {
        handler: String,
        param: String,
        index: u32,
    },
    DmaFetch {
        handler: String,
        callsite: usize,
        occurrence: u32,
    },
}

impl VarOrigin {
    pub fn var_name(&self) -> String {
        match self {
            VarOrigin::StateField { field, index } => format!("state.{field}.{index}"),
            VarOrigin::RequestParam { handler, param } => format!("req.{handler}.{param}"),
            VarOrigin::RequestElem { handler, param, index } => format!("req.{handler}.{param}.{index}"),
            VarOrigin::DmaFetch {
                handler,
                callsite,
                occurrence,
            } => format!("dma.{handler}.{callsite}.{occurrence}"),
        }
    }
}

pub const DMA_WIDTH: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvField {
    pub name: String,
    pub width: u32,
    pub elems: Vec<Term>,
}

/// Symbolic values of every state element, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicEnv {
    fields: Vec<EnvField>,
}

impl SymbolicEnv {
    pub fn fields(&self) -> &[EnvField] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&EnvField> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn get(&self, name: &str, index: u32) -> Option<&Term> {
        self.field(name)?.elems.get(index as usize)
    }

    pub(crate) fn elems_mut(&mut self, field: usize) -> &mut Vec<Term> {
        &mut self.fields[field].elems
    }

    pub(crate) fn elems(&self, field: usize) -> &[Term] {
        &self.fields[field].elems
    }

    fn matches(&self, fields: &[FieldInfo]) -> bool {
        self.fields.len() == fields.len()
            && self
                .fields
                .iter()
                .zip(fields)
                .all(|(e, f)| e.name == f.name && e.width == f.width && e.elems.len() == f.len as usize)
    }

    /// Evaluates every element under `a`.
    pub fn eval(&self, a: &Assignment) -> Result<ConcreteState, EvalError> {
        let mut out = ConcreteState::new();
        for f in &self.fields {
            let vals = f.elems.iter().map(|t| eval(t, a)).collect::<Result<Vec<_>, _>>()?;
            out.insert(f.name.clone(), vals);
        }
        Ok(out)
    }
}

/// Binds every state element of `m` to its shared `state.<field>.<i>`
/// variable, or to `<prefix>.<field>.<i>` when a prefix is given.
pub fn init_env(m: &ValidatedModel, state_prefix: Option<&str>) -> SymbolicEnv {
    init_env_with(m, |_| state_prefix.unwrap_or("state").to_string())
}

/// Like [`init_env`] with a per-field choice of variable prefix.
pub fn init_env_with(m: &ValidatedModel, prefix: impl Fn(&FieldInfo) -> String) -> SymbolicEnv {
    let fields = m
        .fields()
        .iter()
        .map(|f| {
            let p = prefix(f);
            EnvField {
                name: f.name.clone(),
                width: f.width,
                elems: (0..f.len)
                    .map(|i| term::mk_var(&format!("{p}.{}.{i}", f.name), f.width))
                    .collect(),
            }
        })
        .collect();
    SymbolicEnv { fields }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Scalar(Term),
    Array(Vec<Term>),
}

impl Arg {
    pub fn width(&self) -> Option<u32> {
        match self {
            Arg::Scalar(t) => Some(t.width()),
            Arg::Array(v) => v.first().map(Term::width),
        }
    }
}

/// Symbolic request variables for `h`, named `req.<handler>.<param>` and
/// `req.<handler>.<param>.<i>` for array elements.
pub fn request_args(h: &HandlerIr) -> Vec<Arg> {
    h.params
        .iter()
        .map(|p| match p.len {
            None => Arg::Scalar(term::mk_var(
                &VarOrigin::RequestParam {
                    handler: h.name.clone(),
                    param: p.name.clone(),
                }
                .var_name(),
                p.width,
            )),
            Some(n) => Arg::Array(
                (0..n)
                    .map(|i| {
                        let name = VarOrigin::RequestElem {
                            handler: h.name.clone(),
                            param: p.name.clone(),
                            index: i,
                        }
                        .var_name();
                        term::mk_var(&name, p.width)
                    })
                    .collect(),
            ),
        })
        .collect()
}

/// Standing assumptions about a request: for env_input handlers,
/// `len <= declared data length`.
pub fn request_assumptions(h: &HandlerIr, args: &[Arg]) -> PathCondition {
    let mut pc = PathCondition::new();
    if h.kind == HandlerKind::EnvInput {
        if let (Some(Arg::Array(data)), Some(Arg::Scalar(len))) = (args.first(), args.get(1)) {
            let max = (data.len() as u64).min(term::mask(len.width()));
            pc.push(term::mk_ule(len, &term::mk_const(len.width(), max)));
        }
    }
    pc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreBudget {
    pub max_paths: usize,
    pub max_steps_per_path: usize,
    pub loop_bound: u32,
}

impl Default for ExploreBudget {
    fn default() -> Self {
        ExploreBudget {
            max_paths: 4096,
            max_steps_per_path: 100_000,
            loop_bound: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathStatus {
    Complete,
    BoundExhausted,
    OutOfBounds { field: String },
}

impl fmt::Display for PathStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathStatus::Complete => f.write_str("COMPLETE"),
            PathStatus::BoundExhausted => f.write_str("BOUND_EXHAUSTED"),
            PathStatus::OutOfBounds { field } => write!(f, "OUT_OF_BOUNDS({field})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EffectKind {
    Interrupt { line: Term },
    DmaRead { addr: Term, result: Term },
    DmaWrite { addr: Term, value: Term },
    Output { value: Term },
}

impl EffectKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EffectKind::Interrupt { .. } => "interrupt",
            EffectKind::DmaRead { .. } => "dma_read",
            EffectKind::DmaWrite { .. } => "dma_write",
            EffectKind::Output { .. } => "output",
        }
    }

    pub fn args(&self) -> Vec<&Term> {
        match self {
            EffectKind::Interrupt { line } => vec![line],
            EffectKind::DmaRead { addr, result } => vec![addr, result],
            EffectKind::DmaWrite { addr, value } => vec![addr, value],
            EffectKind::Output { value } => vec![value],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectEvent {
    pub seq: usize,
    pub kind: EffectKind,
}

impl EffectEvent {
    pub fn eval(&self, a: &Assignment) -> Result<ConcreteEffect, EvalError> {
        Ok(ConcreteEffect {
            kind: self.kind.tag(),
            args: self
                .kind
                .args()
                .into_iter()
                .map(|t| Ok((t.width(), eval(t, a)?)))
                .collect::<Result<_, EvalError>>()?,
        })
    }
}

impl fmt::Display for EffectEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.kind.args().iter().map(|t| t.to_string()).collect();
        write!(f, "#{} {}({})", self.seq, self.kind.tag(), args.join(", "))
    }
}

/// One explored path of one handler.
#[derive(Clone, Debug)]
pub struct PathSummary {
    pub path_id: usize,
    /// This run's own branch conjuncts plus request assumptions; never
    /// includes the guide.
    pub pc: PathCondition,
    pub final_state: SymbolicEnv,
    /// Present for mmio_read handlers on complete paths.
    pub return_term: Option<Term>,
    pub effects: Vec<EffectEvent>,
    pub status: PathStatus,
    /// Some feasibility query on this path came back unknown.
    pub unknown: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Exploration {
    pub summaries: Vec<PathSummary>,
    /// A path or step limit cut exploration short.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("no handler named {0}")]
    UnknownHandler(String),
    #[error("handler {handler}: {msg}")]
    BadArguments { handler: String, msg: String },
    #[error("environment does not match the state declaration of model {0}")]
    EnvMismatch(String),
}

pub(crate) fn check_args(h: &HandlerIr, args: &[Arg]) -> Result<(), InterpError> {
    let bad = |msg: String| InterpError::BadArguments {
        handler: h.name.clone(),
        msg,
    };
    if args.len() != h.params.len() {
        return Err(bad(format!(
            "expected {} arguments, got {}",
            h.params.len(),
            args.len()
        )));
    }
    for (p, a) in h.params.iter().zip(args) {
        let ok = match (p.len, a) {
            (None, Arg::Scalar(t)) => t.width() == p.width,
            (Some(n), Arg::Array(v)) => v.len() == n as usize && v.iter().all(|t| t.width() == p.width),
            _ => false,
        };
        if !ok {
            return Err(bad(format!("argument {} does not match its declaration", p.name)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
