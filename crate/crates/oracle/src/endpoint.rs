//! The query boundary. Both endpoint kinds expose the same contract:
//! a graph goes in, a bare verdict comes out, and nothing else -- no
//! scores, no feature information.

use std::sync::Arc;

use thiserror::Error;

use detectors::{DetectorError, DetectorModel, Verdict};
use fcg_core::{to_canonical_json, FunctionCallGraph};

use crate::ledger::{QueryLedger, QueryPhase};
use crate::wire::ClassifyReply;

/// Anything that can act as the hidden target model.
pub trait BlackBoxDetector: Send + Sync {
    fn decide(&self, g: &FunctionCallGraph) -> Result<Verdict, DetectorError>;
}

impl BlackBoxDetector for DetectorModel {
    fn decide(&self, g: &FunctionCallGraph) -> Result<Verdict, DetectorError> {
        self.classify(g)
    }
}

impl<F> BlackBoxDetector for F
where
    F: Fn(&FunctionCallGraph) -> Verdict + Send + Sync,
{
    fn decide(&self, g: &FunctionCallGraph) -> Result<Verdict, DetectorError> {
        Ok(self(g))
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("transport: {0}")]
    Transport(String),

    #[error("remote protocol: {0}")]
    Protocol(String),

    #[error("detector: {0}")]
    Detector(#[from] DetectorError),
}

/// A queryable target model.
#[derive(Clone)]
pub enum OracleEndpoint {
    InProcess(Arc<dyn BlackBoxDetector>),
    Remote { base_url: String, agent: ureq::Agent },
}

impl OracleEndpoint {
    pub fn in_process(detector: Arc<dyn BlackBoxDetector>) -> Self {
        OracleEndpoint::InProcess(detector)
    }

    /// Endpoint speaking the /v1 wire protocol at `base_url`
    /// (e.g. "http://127.0.0.1:8844").
    pub fn remote(base_url: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build();
        OracleEndpoint::Remote {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent: config.into(),
        }
    }
}

/// Queries the target with one sample. The ledger is incremented
/// exactly once per successful reply and never on failure.
pub fn query(
    endpoint: &OracleEndpoint,
    ledger: &QueryLedger,
    phase: QueryPhase,
    g: &FunctionCallGraph,
) -> Result<Verdict, OracleError> {
    let verdict = match endpoint {
        OracleEndpoint::InProcess(detector) => detector.decide(g)?,
        OracleEndpoint::Remote { base_url, agent } => query_remote(agent, base_url, g)?,
    };
    ledger.record(phase);
    Ok(verdict)
}

fn query_remote(
    agent: &ureq::Agent,
    base_url: &str,
    g: &FunctionCallGraph,
) -> Result<Verdict, OracleError> {
    let url = format!("{base_url}/v1/classify");
    let mut response = agent
        .post(&url)
        .content_type("application/json")
        .send(to_canonical_json(g))
        .map_err(|e| OracleError::Transport(e.to_string()))?;
    let status = response.status().as_u16();
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| OracleError::Transport(e.to_string()))?;
    if status != 200 {
        return Err(OracleError::Protocol(format!("status {status}: {body}")));
    }
    let reply: ClassifyReply =
        serde_json::from_str(&body).map_err(|e| OracleError::Protocol(e.to_string()))?;
    Ok(reply.label)
}
