//! Legal endpoints for inserted calls, and concretization of abstract
//! edges to function-level pairs.
//!
//! A caller must be a user-defined function that already calls
//! something, so a new invocation can be spliced into its body. A
//! callee must be a leaf (it invokes nothing, so the inserted call can
//! never trigger further calls), public, and take only void, primitive
//! or `String` parameters so invoking it does not instantiate a class.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::FcgError;
use crate::granularity::{node_label, Granularity};
use crate::graph::FunctionCallGraph;
use crate::project::AbstractEdge;

/// Node ids legal as insertion callers and callees for one graph.
/// Either set may be empty; an empty set makes the app unattackable
/// rather than being an error.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateSets {
    pub callers: BTreeSet<u32>,
    pub callees: BTreeSet<u32>,
}

impl CandidateSets {
    pub fn is_attackable(&self) -> bool {
        !self.callers.is_empty() && !self.callees.is_empty()
    }
}

/// Computes the candidate caller/callee sets of `g`.
pub fn candidate_endpoints(g: &FunctionCallGraph) -> CandidateSets {
    let degrees = g.degree_counts();
    let mut sets = CandidateSets::default();
    for node in &g.nodes {
        let (out, _) = degrees[&node.id];
        if node.user_defined && out >= 1 {
            sets.callers.insert(node.id);
        }
        if out == 0 && node.is_public && node.simple_params {
            sets.callees.insert(node.id);
        }
    }
    sets
}

/// Draws a uniformly random concrete (caller, callee) pair realizing
/// the abstract edge `e` in `g`, among candidate endpoints whose labels
/// project to the edge's labels. Deterministic given the rng state.
pub fn concretize_edge<R: Rng + ?Sized>(
    e: &AbstractEdge,
    g: &FunctionCallGraph,
    candidates: &CandidateSets,
    rng: &mut R,
) -> Result<(u32, u32), FcgError> {
    let callers = matching(g, &candidates.callers, e.granularity, &e.caller_label);
    if callers.is_empty() {
        return Err(FcgError::InfeasibleEdge {
            caller_label: e.caller_label.clone(),
            callee_label: e.callee_label.clone(),
            side: "caller",
        });
    }
    let callees = matching(g, &candidates.callees, e.granularity, &e.callee_label);
    if callees.is_empty() {
        return Err(FcgError::InfeasibleEdge {
            caller_label: e.caller_label.clone(),
            callee_label: e.callee_label.clone(),
            side: "callee",
        });
    }
    let caller = callers[rng.random_range(0..callers.len())];
    let callee = callees[rng.random_range(0..callees.len())];
    Ok((caller, callee))
}

fn matching(
    g: &FunctionCallGraph,
    ids: &BTreeSet<u32>,
    level: Granularity,
    label: &str,
) -> Vec<u32> {
    ids.iter()
        .copied()
        .filter(|&id| {
            let node = g.node(id).expect("candidate ids come from g");
            node_label(node, level) == label
        })
        .collect()
}
