//! Projection of a function call graph to a coarser granularity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::granularity::{node_label, reproject_label, Granularity};
use crate::graph::FunctionCallGraph;

/// An added edge expressed at some granularity, the unit of
/// perturbation the search evolves.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbstractEdge {
    pub granularity: Granularity,
    pub caller_label: String,
    pub callee_label: String,
}

/// A call graph whose nodes are labels at one granularity.
/// Edge counts aggregate all concrete calls whose endpoints project to
/// the label pair, so the total call count is preserved at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractGraph {
    pub granularity: Granularity,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

impl AbstractGraph {
    pub fn e_total(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Re-projects to a coarser granularity. Identity when `level`
    /// equals the current granularity; panics if `level` is finer.
    pub fn reproject(&self, level: Granularity) -> AbstractGraph {
        assert!(
            level >= self.granularity,
            "cannot refine an abstract graph ({} -> {})",
            self.granularity,
            level
        );
        let up = |label: &str| {
            reproject_label(label, self.granularity, level).expect("validated label")
        };
        let mut nodes = BTreeSet::new();
        for n in &self.nodes {
            nodes.insert(up(n));
        }
        let mut edges: BTreeMap<(String, String), u64> = BTreeMap::new();
        for ((u, v), c) in &self.edges {
            *edges.entry((up(u), up(v))).or_insert(0) += c;
        }
        AbstractGraph {
            granularity: level,
            nodes,
            edges,
        }
    }
}

/// Projects `g` to `level`. At function level this is the identity
/// relabeling of node ids to `"package::Class::method"` labels.
pub fn project_graph(g: &FunctionCallGraph, level: Granularity) -> AbstractGraph {
    let index = g.node_index();
    let mut nodes = BTreeSet::new();
    let mut labels: BTreeMap<u32, String> = BTreeMap::new();
    for node in &g.nodes {
        let label = node_label(node, level);
        nodes.insert(label.clone());
        labels.insert(node.id, label);
    }
    let mut edges: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (&(u, v), &c) in &g.edges {
        debug_assert!(index.contains_key(&u) && index.contains_key(&v));
        let key = (labels[&u].clone(), labels[&v].clone());
        *edges.entry(key).or_insert(0) += c;
    }
    AbstractGraph {
        granularity: level,
        nodes,
        edges,
    }
}
