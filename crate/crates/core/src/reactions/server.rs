use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use tokio::sync::oneshot;

use super::protocol::{
    outcome_to_wire, BatchRequest, BatchResponse, PkaRequest, PkaResponse, ReactRequest,
    ScoreRequest, ScoreResponse, WireOutcome, WireSite,
};
use super::{OutcomeStatus, ReactionPredictor};
use crate::molgraph::{parse_smiles, Molecule};
use crate::properties::PkaModel;

pub type Scorer = Arc<dyn Fn(&Molecule) -> f64 + Send + Sync>;

/// What the server exposes. The pKa and scoring routes are optional.
#[derive(Clone)]
pub struct Service {
    pub reactions: Arc<dyn ReactionPredictor>,
    pub pka: Option<Arc<dyn PkaModel>>,
    pub scorer: Option<Scorer>,
}

impl Service {
    pub fn reactions_only(reactions: Arc<dyn ReactionPredictor>) -> Self {
        Service {
            reactions,
            pka: None,
            scorer: None,
        }
    }
}

fn json<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let text = serde_json::to_string(body).expect("response bodies serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn bad_request(message: impl Into<String>) -> Response {
    json(StatusCode::BAD_REQUEST, &WireOutcome::error(message))
}

fn parse_pair(reactants: &[String]) -> Result<Vec<Molecule>, String> {
    if reactants.len() != 2 {
        return Err(format!("expected 2 reactants, got {}", reactants.len()));
    }
    reactants
        .iter()
        .map(|s| parse_smiles(s).map_err(|e| format!("invalid reactant '{s}': {e}")))
        .collect()
}

async fn react(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: ReactRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request: {e}")),
    };
    let mols = match parse_pair(&req.reactants) {
        Ok(m) => m,
        Err(e) => return bad_request(e),
    };
    let outcome = svc.reactions.predict(&mols);
    let status = if outcome.status == OutcomeStatus::Error {
        StatusCode::UNPROCESSABLE_ENTITY
    } else {
        StatusCode::OK
    };
    json(status, &outcome_to_wire(&outcome, req.max_products))
}

async fn react_batch(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: BatchRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request: {e}")),
    };
    let mut results = vec![None; req.items.len()];
    let mut valid = Vec::new();
    let mut slots = Vec::new();
    for (i, item) in req.items.iter().enumerate() {
        match parse_pair(item) {
            Ok(m) => {
                valid.push(m);
                slots.push(i);
            }
            Err(e) => results[i] = Some(WireOutcome::error(e)),
        }
    }
    for (slot, outcome) in slots.into_iter().zip(svc.reactions.predict_batch(&valid)) {
        results[slot] = Some(outcome_to_wire(&outcome, 1));
    }
    json(
        StatusCode::OK,
        &BatchResponse {
            results: results.into_iter().map(Option::unwrap).collect(),
        },
    )
}

async fn pka(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let Some(model) = svc.pka.as_ref() else {
        return json(StatusCode::NOT_FOUND, &WireOutcome::error("no pKa backend configured"));
    };
    let req: PkaRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request: {e}")),
    };
    let mol = match parse_smiles(&req.smiles) {
        Ok(m) => m,
        Err(e) => return bad_request(format!("invalid SMILES '{}': {e}", req.smiles)),
    };
    match model.profile(&mol) {
        Ok(p) => json(
            StatusCode::OK,
            &PkaResponse {
                sites: p
                    .sites()
                    .iter()
                    .map(|s| WireSite {
                        atom: s.atom,
                        pka: s.pka,
                        role: s.role,
                    })
                    .collect(),
            },
        ),
        Err(e) => json(StatusCode::INTERNAL_SERVER_ERROR, &WireOutcome::error(e.to_string())),
    }
}

async fn score(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let Some(scorer) = svc.scorer.as_ref() else {
        return json(StatusCode::NOT_FOUND, &WireOutcome::error("no scoring backend configured"));
    };
    let req: ScoreRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request: {e}")),
    };
    let mut scores = Vec::with_capacity(req.smiles.len());
    for s in &req.smiles {
        match parse_smiles(s) {
            Ok(m) => scores.push(scorer(&m)),
            Err(e) => return bad_request(format!("invalid SMILES '{s}': {e}")),
        }
    }
    json(StatusCode::OK, &ScoreResponse { scores })
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/api/v1/react", post(react))
        .route("/api/v1/react_batch", post(react_batch))
        .route("/api/v1/pka", post(pka))
        .route("/api/v1/score", post(score))
        .route("/healthz", get(healthz))
        .with_state(Arc::new(service))
}

fn runtime() -> io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
}

async fn run(
    listener: std::net::TcpListener,
    service: Service,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

fn bind(addr: &str) -> io::Result<std::net::TcpListener> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

/// A server running on a background thread; dropping it shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}

/// Binds `addr` (use port 0 for an ephemeral port) and serves on a
/// background thread.
pub fn spawn_server(service: Service, addr: &str) -> io::Result<ServerHandle> {
    let listener = bind(addr)?;
    let local = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("reaction-server".into())
        .spawn(move || {
            runtime()?.block_on(run(listener, service, async {
                let _ = rx.await;
            }))
        })?;
    Ok(ServerHandle {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Serves on the current thread until the process receives Ctrl-C.
pub fn serve_blocking(service: Service, addr: &str, on_ready: impl FnOnce(SocketAddr)) -> io::Result<()> {
    let listener = bind(addr)?;
    on_ready(listener.local_addr()?);
    runtime()?.block_on(run(listener, service, async {
        let _ = tokio::signal::ctrl_c().await;
    }))
}
