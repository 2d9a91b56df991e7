use thiserror::Error;

/// Errors raised while building, parsing or perturbing call graphs.
#[derive(Debug, Error)]
pub enum FcgError {
    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("node {node_id}: duplicate node id")]
    DuplicateNodeId { node_id: u32 },

    #[error("node {node_id}: duplicate function triple {triple}")]
    DuplicateTriple { node_id: u32, triple: String },

    #[error("node {node_id}: invalid field {field}: {reason}")]
    InvalidNode {
        node_id: u32,
        field: &'static str,
        reason: String,
    },

    #[error("edge #{index} ({caller} -> {callee}): endpoint {missing} does not exist")]
    DanglingEdge {
        index: usize,
        caller: u32,
        callee: u32,
        missing: u32,
    },

    #[error("edge #{index} ({caller} -> {callee}): count must be >= 1")]
    ZeroCount {
        index: usize,
        caller: u32,
        callee: u32,
    },

    #[error("insertion ({caller} -> {callee}): {reason}")]
    IllegalInsertion {
        caller: u32,
        callee: u32,
        reason: String,
    },

    #[error("abstract edge {caller_label} -> {callee_label} is infeasible: no qualifying {side}")]
    InfeasibleEdge {
        caller_label: String,
        callee_label: String,
        side: &'static str,
    },
}

impl FcgError {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        FcgError::Malformed(msg.into())
    }
}
