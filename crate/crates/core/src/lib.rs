//! Differential symbolic execution of two versions of a device model.
//!
//! The new version is explored symbolically; the old version is then
//! replayed under each new path condition, and every state, return-value
//! or side-effect divergence the solver can witness is reported.
//!
//! ```
//! use std::sync::Arc;
//! use vpdiff_core::{build_harness, load_model, run_pipeline, HarnessConfig, SourceUnit};
//!
//! let load = |text: &str| Arc::new(load_model(&SourceUnit::new("m.dm", text), 4).unwrap());
//! let old = load("model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { r = value; } }");
//! let new = load("model M { state { reg r : u8; } handler mmio_write(offset : u8, value : u8) { r = value | 1; } }");
//! let plan = build_harness(old, new, &HarnessConfig::default()).unwrap();
//! let report = run_pipeline(&plan).unwrap();
//! assert_eq!(report.pairs[0].unique_diffs.len(), 1);
//! ```

pub mod diffcheck;
pub mod dsl;
pub mod harness;
pub mod interp;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod solver;
pub mod term;

pub use diffcheck::{
    compare_pair, dedupe, replay, run_pipeline, Certainty, DiffKind, DiffRecord, PairReport, Report, UniqueDiff,
    Verdict,
};
pub use dsl::{
    elide_loops, load_model, parse_model, validate_model, DeviceModel, LoadError, ParseError, SourceUnit,
    ValidatedModel, ValidationError,
};
pub use harness::{build_harness, CompareSpec, HarnessConfig, HarnessError, HarnessPlan, Scenario, Side};
pub use interp::{
    init_env, run_concrete, run_guided, run_handler, ExploreBudget, PathStatus, PathSummary, SymbolicEnv, VarOrigin,
};
pub use solver::{Backend, SolveResult, Solver, SolverConfig};
pub use term::{eval, Assignment, PathCondition, Term};
