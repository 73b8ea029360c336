//! Brute-force reference checks for small models. Compiled for tests and
//! under the `oracle` feature only.
//!
//! Inputs are enumerated over every request variable and every state
//! element that either version's handler reads. State elements nobody
//! reads cannot influence control flow, effects or return values; their
//! final value is either untouched or overwritten, so filling them with
//! all-zeros in one pass and all-ones in another exposes every
//! element-level difference they can take part in.

pub mod terms;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::diffcheck::{replay, DiffKind};
use crate::dsl::ir::{walk_stmts, HandlerIr, IrExprKind};
use crate::dsl::ValidatedModel;
use crate::harness::{HarnessPlan, Scenario, Side};
use crate::interp::PathSummary;
use crate::term::{mask, Assignment, PathCondition};

/// Default ceiling on enumerated input bits.
pub const MAX_BITS: u32 = 16;

/// Names of the state fields `h` reads anywhere in its body.
pub fn fields_read(m: &ValidatedModel, h: &HandlerIr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk_stmts(&h.body, &mut |_| {}, &mut |e| {
        if let IrExprKind::Field { field, .. } = &e.kind {
            out.insert(m.fields()[*field].name.clone());
        }
    });
    out
}

/// The input space of one scenario.
#[derive(Clone, Debug)]
pub struct InputSpace {
    /// Enumerated variables, sorted by name, with widths.
    pub enumerated: Vec<(String, u32)>,
    /// Variables pinned to a fill value, with widths.
    pub filled: Vec<(String, u32)>,
    pub assume: PathCondition,
}

impl InputSpace {
    pub fn bits(&self) -> u32 {
        self.enumerated.iter().map(|(_, w)| *w).sum()
    }

    /// Every input satisfying the request assumptions, once per fill value
    /// (a single pass when nothing is filled).
    pub fn inputs(&self) -> Vec<Assignment> {
        let fills: &[bool] = if self.filled.is_empty() {
            &[false]
        } else {
            &[false, true]
        };
        let mut out = Vec::new();
        let total = self.bits();
        for &ones in fills {
            for n in 0u64..(1u64 << total) {
                let mut a = Assignment::new();
                let mut shift = 0;
                for (name, w) in &self.enumerated {
                    a.set(name.clone(), (n >> shift) & mask(*w));
                    shift += w;
                }
                for (name, w) in &self.filled {
                    a.set(name.clone(), if ones { mask(*w) } else { 0 });
                }
                if self.assume.holds(&a).unwrap_or(false) {
                    out.push(a);
                }
            }
        }
        out
    }
}

/// Input space of a runnable scenario, or `None` when it uses DMA or
/// needs more than `max_bits` enumerated bits.
pub fn input_space(plan: &HarnessPlan, sc: &Scenario, max_bits: u32) -> Option<InputSpace> {
    if !sc.runnable() {
        return None;
    }
    let mut vars: BTreeMap<String, (u32, bool)> = BTreeMap::new();
    for side in [Side::Old, Side::New] {
        let m = plan.model(side);
        let h = m.handler(&sc.handler)?;
        if h.dma_callsites > 0 {
            return None;
        }
        let read = fields_read(m, h);
        for f in plan.env(side).fields() {
            for t in &f.elems {
                let name = t.as_var().expect("initial state is variables").to_string();
                let e = vars.entry(name).or_insert((t.width(), false));
                e.1 |= read.contains(&f.name);
            }
        }
    }
    for (name, w) in &sc.request_vars {
        vars.insert(name.clone(), (*w, true));
    }
    let (enumerated, filled): (Vec<_>, Vec<_>) = vars.into_iter().partition(|(_, (_, read))| *read);
    let space = InputSpace {
        enumerated: enumerated.into_iter().map(|(n, (w, _))| (n, w)).collect(),
        filled: filled.into_iter().map(|(n, (w, _))| (n, w)).collect(),
        assume: plan.request(&sc.handler)?.1,
    };
    (space.bits() <= max_bits).then_some(space)
}

/// Every divergence kind reachable by some input, found by running both
/// versions concretely on the whole input space.
pub fn exhaustive_diffs(plan: &HarnessPlan, sc: &Scenario, space: &InputSpace) -> BTreeSet<DiffKind> {
    space
        .inputs()
        .par_iter()
        .map(|a| -> BTreeSet<DiffKind> {
            replay(plan, &sc.handler, a)
                .expect("oracle replay")
                .into_iter()
                .collect()
        })
        .reduce(BTreeSet::new, |mut x, y| {
            x.extend(y);
            x
        })
}

/// Problems found when checking that `pcs` split `inputs` into disjoint
/// covering classes. Each input must satisfy exactly one condition, after
/// restricting to inputs where `guide` holds.
pub fn partition_violations<'a>(
    summaries: impl IntoIterator<Item = &'a PathSummary>,
    guide: &PathCondition,
    inputs: &[Assignment],
) -> Vec<String> {
    let pcs: Vec<(usize, &PathCondition)> = summaries.into_iter().map(|s| (s.path_id, &s.pc)).collect();
    inputs
        .par_iter()
        .filter(|a| guide.holds(a).unwrap_or(false))
        .filter_map(|a| {
            let covering: Vec<usize> = pcs
                .iter()
                .filter(|(_, pc)| pc.holds(a).expect("inputs cover every path variable"))
                .map(|(id, _)| *id)
                .collect();
            (covering.len() != 1).then(|| format!("input {a} is covered by paths {covering:?}"))
        })
        .collect()
}

/// Problems with the old-version paths explored under `guide`: each must
/// share at least one input with it, and together they must split the
/// guide's inputs into disjoint classes.
pub fn guided_violations(guide: &PathSummary, guided: &[PathSummary], inputs: &[Assignment]) -> Vec<String> {
    let mut out = partition_violations(guided, &guide.pc, inputs);
    for g in guided {
        let shared = inputs
            .par_iter()
            .any(|a| guide.pc.holds(a).unwrap_or(false) && g.pc.holds(a).unwrap_or(false));
        if !shared {
            out.push(format!(
                "guided path {} shares no input with guide path {}",
                g.path_id, guide.path_id
            ));
        }
    }
    out
}
