//! The on-disk graph format and its canonical serialization.
//!
//! One JSON document per app. Canonical form sorts nodes by id and
//! edges lexicographically by (caller, callee), so serialization
//! round-trips bit-exactly and outputs diff cleanly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::FcgError;
use crate::graph::{AppLabel, FunctionCallGraph, FunctionNode};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FcgDocument {
    app_id: String,
    label: AppLabel,
    year: i32,
    trycatch_count: u64,
    nodes: Vec<FunctionNode>,
    edges: Vec<(u32, u32, u64)>,
}

/// Parses a graph document, validating all invariants.
pub fn parse_fcg_str(text: &str) -> Result<FunctionCallGraph, FcgError> {
    let doc: FcgDocument =
        serde_json::from_str(text).map_err(|e| FcgError::malformed(e.to_string()))?;
    FunctionCallGraph::new(
        doc.app_id,
        doc.label,
        doc.year,
        doc.trycatch_count,
        doc.nodes,
        doc.edges,
    )
}

/// Reads and parses the graph document at `path`.
pub fn parse_fcg(path: impl AsRef<Path>) -> Result<FunctionCallGraph, FcgError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FcgError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fcg_str(&text)
}

/// Canonical pretty-printed JSON for `g`, newline terminated.
pub fn to_canonical_json(g: &FunctionCallGraph) -> String {
    // nodes are stored sorted by id, edges iterate in BTreeMap order
    let doc = FcgDocument {
        app_id: g.app_id.clone(),
        label: g.label,
        year: g.year,
        trycatch_count: g.trycatch_count,
        nodes: g.nodes.clone(),
        edges: g.edges.iter().map(|(&(u, v), &c)| (u, v, c)).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("graph serialization is infallible");
    s.push('\n');
    s
}

/// Writes `g` in canonical form.
pub fn write_fcg(g: &FunctionCallGraph, path: impl AsRef<Path>) -> Result<(), FcgError> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_json(g)).map_err(|source| FcgError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_parses() {
        let text = r#"{
            "app_id": "t",
            "label": "benign",
            "year": 2019,
            "trycatch_count": 2,
            "nodes": [
                {"id": 0, "package": "app.a", "class": "A", "method": "f",
                 "user_defined": true, "public": true, "simple_params": true},
                {"id": 1, "package": "java.lang", "class": "B", "method": "g",
                 "user_defined": false, "public": true, "simple_params": true}
            ],
            "edges": [[0, 1, 1]]
        }"#;
        let g = parse_fcg_str(text).unwrap();
        assert_eq!(g.e_total(), 1);
        assert_eq!(g.label, AppLabel::Benign);
        assert_eq!(g.trycatch_count, 2);
    }

    #[test]
    fn dangling_edge_reported() {
        let text = r#"{
            "app_id": "t", "label": "unknown", "year": 2019, "trycatch_count": 0,
            "nodes": [
                {"id": 0, "package": "a.b", "class": "A", "method": "f",
                 "user_defined": true, "public": true, "simple_params": true},
                {"id": 1, "package": "a.b", "class": "B", "method": "f",
                 "user_defined": true, "public": true, "simple_params": true},
                {"id": 2, "package": "a.b", "class": "C", "method": "f",
                 "user_defined": true, "public": true, "simple_params": true}
            ],
            "edges": [[0, 99, 1]]
        }"#;
        let err = parse_fcg_str(text).unwrap_err();
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn missing_nodes_field_is_malformed() {
        let err = parse_fcg_str(r#"{"app_id": "t", "label": "unknown"}"#).unwrap_err();
        assert!(matches!(err, FcgError::Malformed(_)));
    }

    #[test]
    fn serialize_then_parse_is_identity() {
        let text = r#"{
            "app_id": "t", "label": "malicious", "year": 2021, "trycatch_count": 5,
            "nodes": [
                {"id": 1, "package": "java.io", "class": "B", "method": "g",
                 "user_defined": false, "public": true, "simple_params": false},
                {"id": 0, "package": "app.a", "class": "A", "method": "f",
                 "user_defined": true, "public": false, "simple_params": true}
            ],
            "edges": [[0, 1, 3], [0, 0, 1]]
        }"#;
        let g = parse_fcg_str(text).unwrap();
        let canon = to_canonical_json(&g);
        let g2 = parse_fcg_str(&canon).unwrap();
        assert_eq!(g, g2);
        // a second serialization is byte-identical
        assert_eq!(to_canonical_json(&g2), canon);
    }
}
