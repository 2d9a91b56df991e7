//! HTTP face of the oracle: the /v1 query/reply loop.
//!
//! POST /v1/classify takes a graph document and answers with the bare
//! label; GET /v1/stats reports how many classifications were served.
//! Responses never carry probabilities.

use std::io::Read;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use detectors::{DetectorError, DetectorModel};
use fcg_core::parse_fcg_str;

use crate::endpoint::{BlackBoxDetector, OracleError};
use crate::wire::{ClassifyReply, ErrorReply, StatsReply};

const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

/// A running oracle service; dropping the handle without calling
/// [`ServerHandle::shutdown`] leaves workers running for the process
/// lifetime.
pub struct ServerHandle {
    base_url: String,
    queries: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Classifications served so far.
    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // unblock wakes a single blocked recv(), so issue one per worker
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

/// Loads a detector model file and serves it.
pub fn serve_detector(
    model_path: impl AsRef<std::path::Path>,
    bind: &str,
) -> Result<ServerHandle, OracleError> {
    let model = DetectorModel::load(model_path.as_ref())?;
    serve(Arc::new(model), bind, 4)
}

/// Serves any black-box detector on `bind` (e.g. "127.0.0.1:0") with
/// the given number of worker threads.
pub fn serve(
    detector: Arc<dyn BlackBoxDetector>,
    bind: &str,
    workers: usize,
) -> Result<ServerHandle, OracleError> {
    let server = Arc::new(
        tiny_http::Server::http(bind).map_err(|e| OracleError::Transport(e.to_string()))?,
    );
    let addr = server
        .server_addr()
        .to_ip()
        .expect("http listener has an ip address");
    let queries = Arc::new(AtomicU64::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let worker_handles = (0..workers.max(1))
        .map(|_| {
            let server = server.clone();
            let detector = detector.clone();
            let queries = queries.clone();
            let stop = stop.clone();
            std::thread::spawn(move || loop {
                match server.recv() {
                    Ok(request) => handle_request(request, detector.as_ref(), &queries),
                    Err(_) => {
                        if stop.load(Ordering::SeqCst) {
                            return;
                        }
                    }
                }
                if stop.load(Ordering::SeqCst) {
                    return;
                }
            })
        })
        .collect();
    Ok(ServerHandle {
        base_url: format!("http://{addr}"),
        queries,
        stop,
        server,
        workers: worker_handles,
    })
}

fn handle_request(mut request: tiny_http::Request, detector: &dyn BlackBoxDetector, queries: &AtomicU64) {
    let method = request.method().as_str().to_string();
    let url = request.url().to_string();
    let (status, body) = match (method.as_str(), url.as_str()) {
        ("POST", "/v1/classify") => {
            let mut text = String::new();
            let read = request
                .as_reader()
                .take(MAX_BODY_BYTES as u64)
                .read_to_string(&mut text);
            match read {
                Err(e) => error_reply(400, format!("unreadable body: {e}")),
                Ok(_) => classify_reply(&text, detector, queries),
            }
        }
        ("GET", "/v1/stats") => (
            200,
            serde_json::to_string(&StatsReply {
                queries: queries.load(Ordering::Relaxed),
            })
            .expect("stats serialize"),
        ),
        _ => error_reply(404, format!("no such endpoint: {method} {url}")),
    };
    let response = tiny_http::Response::from_string(body)
        .with_status_code(status)
        .with_header(
            tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        );
    if let Err(e) = request.respond(response) {
        log::warn!("failed to respond: {e}");
    }
}

fn classify_reply(
    body: &str,
    detector: &dyn BlackBoxDetector,
    queries: &AtomicU64,
) -> (u16, String) {
    let graph = match parse_fcg_str(body) {
        Ok(g) => g,
        Err(e) => return error_reply(400, e.to_string()),
    };
    match detector.decide(&graph) {
        Ok(label) => {
            queries.fetch_add(1, Ordering::Relaxed);
            (
                200,
                serde_json::to_string(&ClassifyReply { label }).expect("reply serialize"),
            )
        }
        Err(DetectorError::SchemaMismatch { .. }) => {
            error_reply(422, "feature schema mismatch".to_string())
        }
        Err(_) => error_reply(500, "internal error".to_string()),
    }
}

fn error_reply(status: u16, error: String) -> (u16, String) {
    (
        status,
        serde_json::to_string(&ErrorReply { error }).expect("error serialize"),
    )
}
