//! Satisfiability of path conditions.
//!
//! Two backends: an exhaustive enumerator over the free variables of a
//! condition, and an external SMT-LIB v2 process. Every `Sat` witness is
//! re-checked with [`crate::term::eval`] before it leaves this module.

mod builtin;
mod external;
mod smtlib;

use serde::{Deserialize, Serialize};

use std::collections::HashSet;

use crate::term::{mk_not, Assignment, PathCondition, Term};

pub use smtlib::to_smtlib;

/// Environment variable that overrides the external solver command.
pub const SOLVER_ENV: &str = "VPDIFF_SOLVER";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Builtin,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: Backend,
    /// Largest total free-variable width the enumerator will attempt.
    pub builtin_budget_bits: u32,
    pub external_cmd: Option<String>,
    pub timeout_ms: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: Backend::Builtin,
            builtin_budget_bits: 24,
            external_cmd: None,
            timeout_ms: 5000,
        }
    }
}

impl SolverConfig {
    pub fn external(cmd: impl Into<String>) -> Self {
        SolverConfig {
            backend: Backend::External,
            external_cmd: Some(cmd.into()),
            ..Self::default()
        }
    }

    /// The external command, honouring [`SOLVER_ENV`].
    pub fn resolved_external_cmd(&self) -> Option<String> {
        std::env::var(SOLVER_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .or_else(|| self.external_cmd.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Assignment),
    Unsat,
    Unknown(String),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveResult::Unsat)
    }

    pub fn witness(&self) -> Option<&Assignment> {
        match self {
            SolveResult::Sat(a) => Some(a),
            _ => None,
        }
    }
}

/// A configured decision procedure. Cheap to clone and safe to share.
#[derive(Clone, Debug, Default)]
pub struct Solver {
    config: SolverConfig,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        assert!(config.builtin_budget_bits >= 1, "builtin budget must be >= 1 bit");
        Solver { config }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn solve(&self, pc: &PathCondition) -> SolveResult {
        if pc.is_false() {
            return SolveResult::Unsat;
        }
        if pc.is_true() {
            return SolveResult::Sat(Assignment::new());
        }
        if has_complementary_pair(pc) {
            return SolveResult::Unsat;
        }
        let result = match self.config.backend {
            Backend::Builtin => builtin::solve(pc, self.config.builtin_budget_bits),
            Backend::External => match self.config.resolved_external_cmd() {
                Some(cmd) => external::solve(pc, &cmd, self.config.timeout_ms),
                None => SolveResult::Unknown("no external solver command".into()),
            },
        };
        verify(pc, result)
    }
}

/// Whether some conjunct appears together with its negation.
fn has_complementary_pair(pc: &PathCondition) -> bool {
    let ids: HashSet<u64> = pc.conjuncts().iter().map(Term::id).collect();
    pc.conjuncts().iter().any(|c| ids.contains(&mk_not(c).id()))
}

/// Downgrades a witness that does not satisfy `pc` to `Unknown`.
fn verify(pc: &PathCondition, result: SolveResult) -> SolveResult {
    match result {
        SolveResult::Sat(mut witness) => {
            // Solvers may omit variables that do not matter; pin them to zero.
            for (name, _) in pc.free_vars() {
                if witness.get(&name).is_none() {
                    witness.set(name, 0);
                }
            }
            match pc.holds(&witness) {
                Ok(true) => SolveResult::Sat(witness),
                _ => SolveResult::Unknown("bad-model".into()),
            }
        }
        other => other,
    }
}
