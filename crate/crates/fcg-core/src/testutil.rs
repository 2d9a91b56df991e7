//! Deterministic random-graph builders for tests and property checks.
//!
//! These are structural generators without class signal; the experiment
//! harness has its own corpus generator with planted labels.

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{AppLabel, FunctionCallGraph, FunctionNode};

const FAMILIES: &[&str] = &["java", "android", "com", "org", "javax", "kotlin"];

/// Shape of a generated test graph.
#[derive(Debug, Clone)]
pub struct TestGraphSpec {
    pub user_nodes: usize,
    pub api_nodes: usize,
    /// calls per user node, inclusive range
    pub calls_min: usize,
    pub calls_max: usize,
    /// probability that a call targets another user node
    pub internal_call_prob: f64,
}

impl Default for TestGraphSpec {
    fn default() -> Self {
        TestGraphSpec {
            user_nodes: 8,
            api_nodes: 16,
            calls_min: 1,
            calls_max: 5,
            internal_call_prob: 0.3,
        }
    }
}

/// Builds a random graph from `seed`. User nodes always have at least
/// one outgoing call; API nodes are leaves with randomized
/// public/simple-params flags.
pub fn random_graph(seed: u64, spec: &TestGraphSpec) -> FunctionCallGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let user_packages = ["app.core", "app.ui", "app.net"];
    for i in 0..spec.user_nodes {
        nodes.push(FunctionNode {
            id: i as u32,
            package: user_packages[i % user_packages.len()].to_string(),
            class_name: format!("U{}", i / 2),
            method: format!("m{i}"),
            user_defined: true,
            is_public: true,
            simple_params: true,
        });
    }
    for j in 0..spec.api_nodes {
        let family = FAMILIES[rng.random_range(0..FAMILIES.len())];
        let id = (spec.user_nodes + j) as u32;
        nodes.push(FunctionNode {
            id,
            package: format!("{family}.p{}", rng.random_range(0..3)),
            class_name: format!("A{j}"),
            method: format!("call{j}"),
            user_defined: false,
            is_public: rng.random_bool(0.8),
            simple_params: rng.random_bool(0.8),
        });
    }
    let mut edges = Vec::new();
    for i in 0..spec.user_nodes {
        let calls = rng.random_range(spec.calls_min..=spec.calls_max);
        for _ in 0..calls.max(1) {
            let target = if spec.user_nodes > 1 && rng.random_bool(spec.internal_call_prob) {
                rng.random_range(0..spec.user_nodes) as u32
            } else {
                (spec.user_nodes + rng.random_range(0..spec.api_nodes)) as u32
            };
            edges.push((i as u32, target, rng.random_range(1..=3u64)));
        }
    }
    FunctionCallGraph::new(
        format!("test-{seed}"),
        AppLabel::Unknown,
        2015 + (seed % 6) as i32,
        seed % 20,
        nodes,
        edges,
    )
    .expect("generated graph is valid")
}

/// Random graph with default shape.
pub fn small_graph(seed: u64) -> FunctionCallGraph {
    random_graph(seed, &TestGraphSpec::default())
}

/// A random sample of legal insertions for `g`, or an empty list if
/// the graph is unattackable.
pub fn random_insertions(g: &FunctionCallGraph, count: usize, seed: u64) -> Vec<(u32, u32)> {
    let sets = crate::candidate::candidate_endpoints(g);
    if !sets.is_attackable() {
        return Vec::new();
    }
    let callers: Vec<u32> = sets.callers.iter().copied().collect();
    let callees: Vec<u32> = sets.callees.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                *callers.choose(&mut rng).expect("non-empty"),
                *callees.choose(&mut rng).expect("non-empty"),
            )
        })
        .collect()
}

/// Relabels node ids by a seeded permutation, preserving structure.
/// Used for permutation-invariance checks.
pub fn permute_node_ids(g: &FunctionCallGraph, seed: u64) -> FunctionCallGraph {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut new_ids: Vec<u32> = (0..g.nodes.len() as u32).collect();
    new_ids.shuffle(&mut rng);
    let position: std::collections::HashMap<u32, u32> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id, new_ids[i]))
        .collect();
    let nodes = g
        .nodes
        .iter()
        .map(|n| FunctionNode {
            id: position[&n.id],
            ..n.clone()
        })
        .collect();
    let edges = g
        .edges
        .iter()
        .map(|(&(u, v), &c)| (position[&u], position[&v], c))
        .collect();
    FunctionCallGraph::new(
        g.app_id.clone(),
        g.label,
        g.year,
        g.trycatch_count,
        nodes,
        edges,
    )
    .expect("permutation preserves validity")
}
