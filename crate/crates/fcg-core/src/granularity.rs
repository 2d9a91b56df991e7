//! Feature granularities and node-label projection.
//!
//! A node can be named at four granularities, from fine to coarse:
//! function, class, package, family. The label formats are
//! `"package::Class::method"`, `"package::Class"`, `"package"` and the
//! first dot-token of the package respectively, so projecting a fine
//! label to any coarser level is a pure prefix operation.

use serde::{Deserialize, Serialize};

use crate::graph::FunctionNode;

/// Abstraction level of call-graph nodes, ordered fine to coarse:
/// `Function < Class < Package < Family`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Function,
    Class,
    Package,
    Family,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Function,
        Granularity::Class,
        Granularity::Package,
        Granularity::Family,
    ];

    /// The three granularities a detector may plausibly use as its
    /// feature level; function level is the concretization substrate.
    pub const POPULATIONS: [Granularity; 3] =
        [Granularity::Class, Granularity::Package, Granularity::Family];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Function => "function",
            Granularity::Class => "class",
            Granularity::Package => "package",
            Granularity::Family => "family",
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// First dot-token of a package string, e.g. `"java.lang"` -> `"java"`.
pub fn family_of(package: &str) -> &str {
    package.split('.').next().unwrap_or(package)
}

/// Label of `node` at `level`.
pub fn node_label(node: &FunctionNode, level: Granularity) -> String {
    match level {
        Granularity::Function => node.triple(),
        Granularity::Class => format!("{}::{}", node.package, node.class_name),
        Granularity::Package => node.package.clone(),
        Granularity::Family => family_of(&node.package).to_string(),
    }
}

/// Re-projects a label from a finer level to a coarser one.
///
/// Returns `None` when `to` is strictly finer than `from` (refinement
/// is not a function) or when the label does not parse at `from`.
pub fn reproject_label(label: &str, from: Granularity, to: Granularity) -> Option<String> {
    if to < from {
        return None;
    }
    if to == from {
        return Some(label.to_string());
    }
    let package = match from {
        Granularity::Function | Granularity::Class => label.split("::").next()?,
        Granularity::Package => label,
        Granularity::Family => return None, // to > from impossible past Family
    };
    match to {
        Granularity::Class => {
            // from == Function: keep "package::Class"
            let mut parts = label.split("::");
            let pkg = parts.next()?;
            let class = parts.next()?;
            Some(format!("{pkg}::{class}"))
        }
        Granularity::Package => Some(package.to_string()),
        Granularity::Family => Some(family_of(package).to_string()),
        Granularity::Function => None,
    }
}
