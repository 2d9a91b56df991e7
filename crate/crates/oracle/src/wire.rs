//! Wire documents of the /v1 protocol. Replies are single compact
//! objects and deliberately carry nothing beyond the contract: a
//! classify reply has exactly one field.

use serde::{Deserialize, Serialize};

use detectors::Verdict;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyReply {
    pub label: Verdict,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsReply {
    pub queries: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
}
