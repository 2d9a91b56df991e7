//! Applying edge insertions to a graph.

use crate::candidate::CandidateSets;
use crate::error::FcgError;
use crate::graph::FunctionCallGraph;

/// Returns a new graph with each (caller, callee) pair's count bumped
/// by one. Every pair must satisfy the candidate rules of `g` itself
/// (computed via `candidate_endpoints`); an illegal pair is rejected,
/// never silently dropped.
///
/// Because callers and callees are disjoint (callers have out-degree
/// >= 1, callees 0) and insertions only add out-edges to callers,
/// every inserted callee is still a leaf in the result.
pub fn apply_perturbation(
    g: &FunctionCallGraph,
    candidates: &CandidateSets,
    insertions: &[(u32, u32)],
) -> Result<FunctionCallGraph, FcgError> {
    for &(caller, callee) in insertions {
        if !candidates.callers.contains(&caller) {
            return Err(FcgError::IllegalInsertion {
                caller,
                callee,
                reason: "caller is not a candidate caller".into(),
            });
        }
        if !candidates.callees.contains(&callee) {
            return Err(FcgError::IllegalInsertion {
                caller,
                callee,
                reason: "callee is not a candidate callee".into(),
            });
        }
    }
    let mut out = g.clone();
    for &(caller, callee) in insertions {
        *out.edges.entry((caller, callee)).or_insert(0) += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::candidate_endpoints;
    use crate::graph::{AppLabel, FunctionNode};

    fn node(id: u32, package: &str, user_defined: bool) -> FunctionNode {
        FunctionNode {
            id,
            package: package.into(),
            class_name: format!("C{id}"),
            method: format!("m{id}"),
            user_defined,
            is_public: true,
            simple_params: true,
        }
    }

    fn graph() -> FunctionCallGraph {
        FunctionCallGraph::new(
            "a",
            AppLabel::Malicious,
            2020,
            0,
            vec![
                node(0, "app.core", true),
                node(1, "java.lang", false),
                node(2, "java.io", false),
            ],
            vec![(0, 1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn empty_insertion_is_identity() {
        let g = graph();
        let sets = candidate_endpoints(&g);
        let out = apply_perturbation(&g, &sets, &[]).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn duplicate_insertion_raises_count() {
        let g = graph();
        let sets = candidate_endpoints(&g);
        // (0, 1) already exists with count 1
        let out = apply_perturbation(&g, &sets, &[(0, 1)]).unwrap();
        assert_eq!(out.edges[&(0, 1)], 2);
        assert_eq!(out.e_total(), g.e_total() + 1);
        assert_eq!(out.nodes, g.nodes);
    }

    #[test]
    fn illegal_caller_rejected() {
        let g = graph();
        let sets = candidate_endpoints(&g);
        // node 1 is a leaf, not a candidate caller
        let err = apply_perturbation(&g, &sets, &[(1, 2)]).unwrap_err();
        assert!(matches!(err, FcgError::IllegalInsertion { caller: 1, .. }));
    }

    #[test]
    fn apr_after_two_insertions() {
        let g = FunctionCallGraph::new(
            "a",
            AppLabel::Malicious,
            2020,
            0,
            vec![
                node(0, "app.core", true),
                node(1, "java.lang", false),
                node(2, "java.io", false),
            ],
            vec![(0, 1, 50), (0, 2, 50)],
        )
        .unwrap();
        let sets = candidate_endpoints(&g);
        let out = apply_perturbation(&g, &sets, &[(0, 1), (0, 2)]).unwrap();
        let added = out.e_total() - g.e_total();
        let apr = added as f64 / g.e_total() as f64;
        assert_eq!(apr, 0.02);
    }
}
