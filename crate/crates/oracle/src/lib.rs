//! Strict black-box boundary around a detector: binary-decision
//! queries with exact accounting, in-process or over the /v1 wire
//! protocol.

mod endpoint;
mod ledger;
mod server;
mod wire;

pub use detectors::Verdict;
pub use endpoint::{query, BlackBoxDetector, OracleEndpoint, OracleError};
pub use ledger::{ledger_report, LedgerSnapshot, QueryLedger, QueryPhase};
pub use server::{serve, serve_detector, ServerHandle};
pub use wire::{ClassifyReply, ErrorReply, StatsReply};
