//! The function call graph and its nodes.
//!
//! A graph is a directed multigraph: parallel calls between the same
//! caller/callee pair are kept as an edge count, because count-based
//! transition features change when an existing call is duplicated.
//! Graphs are immutable after construction; every mutation returns a
//! new value.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::FcgError;

/// Ground-truth label attached to an app in a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AppLabel {
    Benign,
    Malicious,
    Unknown,
}

impl std::fmt::Display for AppLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppLabel::Benign => write!(f, "benign"),
            AppLabel::Malicious => write!(f, "malicious"),
            AppLabel::Unknown => write!(f, "unknown"),
        }
    }
}

/// One function in an app, named by its (package, class, method) triple.
///
/// `user_defined` marks app code as opposed to platform/API code.
/// `is_public` and `simple_params` qualify leaf functions as insertion
/// callees: only public leaves whose parameters are void, primitive or
/// `String` can be invoked without instantiating a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionNode {
    pub id: u32,
    pub package: String,
    #[serde(rename = "class")]
    pub class_name: String,
    pub method: String,
    pub user_defined: bool,
    #[serde(rename = "public")]
    pub is_public: bool,
    pub simple_params: bool,
}

impl FunctionNode {
    /// `"package::Class::method"`, the function-level label.
    pub fn triple(&self) -> String {
        format!("{}::{}::{}", self.package, self.class_name, self.method)
    }
}

/// A directed multigraph of function calls for one app.
///
/// Invariants (enforced by [`FunctionCallGraph::new`] and by parsing):
/// node ids and (package, class, method) triples are unique, every edge
/// endpoint exists, every edge count is >= 1, and name components are
/// non-empty and free of the `::` label separator.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCallGraph {
    pub app_id: String,
    pub label: AppLabel,
    pub year: i32,
    pub trycatch_count: u64,
    pub nodes: Vec<FunctionNode>,
    /// (caller id, callee id) -> call count. BTreeMap keeps edge
    /// iteration in canonical order.
    pub edges: BTreeMap<(u32, u32), u64>,
}

impl FunctionCallGraph {
    /// Builds a graph from parts, validating all invariants.
    /// Duplicate (caller, callee) entries in `edges` are merged by
    /// summing their counts.
    pub fn new(
        app_id: impl Into<String>,
        label: AppLabel,
        year: i32,
        trycatch_count: u64,
        mut nodes: Vec<FunctionNode>,
        edges: Vec<(u32, u32, u64)>,
    ) -> Result<Self, FcgError> {
        nodes.sort_by_key(|n| n.id);
        let mut ids = HashMap::with_capacity(nodes.len());
        let mut triples = HashMap::with_capacity(nodes.len());
        for node in &nodes {
            validate_node(node)?;
            if ids.insert(node.id, ()).is_some() {
                return Err(FcgError::DuplicateNodeId { node_id: node.id });
            }
            if triples.insert(node.triple(), ()).is_some() {
                return Err(FcgError::DuplicateTriple {
                    node_id: node.id,
                    triple: node.triple(),
                });
            }
        }
        let mut edge_map = BTreeMap::new();
        for (index, &(caller, callee, count)) in edges.iter().enumerate() {
            if count == 0 {
                return Err(FcgError::ZeroCount {
                    index,
                    caller,
                    callee,
                });
            }
            for endpoint in [caller, callee] {
                if !ids.contains_key(&endpoint) {
                    return Err(FcgError::DanglingEdge {
                        index,
                        caller,
                        callee,
                        missing: endpoint,
                    });
                }
            }
            *edge_map.entry((caller, callee)).or_insert(0) += count;
        }
        Ok(FunctionCallGraph {
            app_id: app_id.into(),
            label,
            year,
            trycatch_count,
            nodes,
            edges: edge_map,
        })
    }

    /// Total number of calls, counting multiplicities.
    pub fn e_total(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Lookup map from node id to node.
    pub fn node_index(&self) -> HashMap<u32, &FunctionNode> {
        self.nodes.iter().map(|n| (n.id, n)).collect()
    }

    pub fn node(&self, id: u32) -> Option<&FunctionNode> {
        // nodes are sorted by id after construction
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    /// Out-degree counting multiplicities (self-calls included).
    pub fn out_count(&self, id: u32) -> u64 {
        self.edges
            .range((id, 0)..=(id, u32::MAX))
            .map(|(_, c)| c)
            .sum()
    }

    /// In-degree counting multiplicities.
    pub fn in_count(&self, id: u32) -> u64 {
        self.edges
            .iter()
            .filter(|((_, v), _)| *v == id)
            .map(|(_, c)| c)
            .sum()
    }

    /// Per-node (out, in) call counts for the whole graph in one pass.
    pub fn degree_counts(&self) -> HashMap<u32, (u64, u64)> {
        let mut map: HashMap<u32, (u64, u64)> =
            self.nodes.iter().map(|n| (n.id, (0, 0))).collect();
        for (&(u, v), &c) in &self.edges {
            map.get_mut(&u).expect("validated endpoint").0 += c;
            map.get_mut(&v).expect("validated endpoint").1 += c;
        }
        map
    }
}

fn validate_node(node: &FunctionNode) -> Result<(), FcgError> {
    let checks: [(&'static str, &str); 3] = [
        ("package", &node.package),
        ("class", &node.class_name),
        ("method", &node.method),
    ];
    for (field, value) in checks {
        if value.is_empty() {
            return Err(FcgError::InvalidNode {
                node_id: node.id,
                field,
                reason: "must be non-empty".into(),
            });
        }
        if value.contains("::") {
            return Err(FcgError::InvalidNode {
                node_id: node.id,
                field,
                reason: "must not contain the label separator \"::\"".into(),
            });
        }
    }
    // family(package) is the first dot-token; it must be non-empty
    if node.package.starts_with('.') {
        return Err(FcgError::InvalidNode {
            node_id: node.id,
            field: "package",
            reason: "family (first dot-token) must be non-empty".into(),
        });
    }
    Ok(())
}
