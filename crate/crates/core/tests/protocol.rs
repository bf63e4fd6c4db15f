mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use lipidgen::optimize::{ProductScorer, RemoteScorer, ScoreError, SurrogateScorer};
use lipidgen::properties::{assign_pka, PkaModel, PropertyModel, RemotePka, RulePka};
use lipidgen::reactions::{
    spawn_server, Endpoint, OutcomeStatus, ReactionPredictor, RemotePredictor, Service, TemplateEngine,
};
use lipidgen::transport::{JsonClient, RetryPolicy, TransportError};
use lipidgen::{canonical_smiles, parse_smiles};
use serde::{Deserialize, Serialize};

fn fast_policy(attempts: u32, timeout_ms: u64) -> RetryPolicy {
    RetryPolicy {
        max_attempts: attempts,
        initial_backoff: Duration::from_millis(5),
        backoff_factor: 2.0,
        timeout: Duration::from_millis(timeout_ms),
    }
}

fn full_service() -> Service {
    let model = PropertyModel::default();
    let scorer = SurrogateScorer { model };
    Service {
        reactions: Arc::new(TemplateEngine::default()),
        pka: Some(Arc::new(RulePka::default())),
        scorer: Some(Arc::new(move |m| scorer.score(m))),
    }
}

/// Minimal HTTP/1.1 server: `reply(n)` gives status, body and delay for the
/// n-th request (from 0). Returns the base URL and the request counter.
fn mock(reply: impl Fn(usize) -> (u16, String, u64) + Send + Sync + 'static) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let count = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&count);
    let reply = Arc::new(reply);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let n = c.fetch_add(1, Ordering::SeqCst);
            let reply = Arc::clone(&reply);
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                let (status, text, delay) = reply(n);
                thread::sleep(Duration::from_millis(delay));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                    text.len()
                );
            });
        }
    });
    (url, count)
}

const OK_REPLY: &str = r#"{"status":"ok","products":["CCCCCCCCCC(=O)OCCN"]}"#;

#[test]
fn server_errors_are_retried_until_success() {
    let (url, count) = mock(|n| if n < 2 { (503, "{}".into(), 0) } else { (200, OK_REPLY.into(), 0) });
    let p = RemotePredictor::new(JsonClient::new(&url, fast_policy(3, 2000), 2).unwrap());
    let o = p.predict_smiles(&["NCCO".into(), "CCCCCCCCCC(=O)O".into()]);
    assert!(o.is_ok(), "{:?}", o.message);
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_are_bounded() {
    let (url, count) = mock(|_| (500, "{}".into(), 0));
    let c = JsonClient::new(&url, fast_policy(4, 2000), 2).unwrap();
    let r: Result<serde_json::Value, _> = c.post("/api/v1/react", &serde_json::json!({}));
    assert!(matches!(r, Err(TransportError::Exhausted { attempts: 4, .. })), "{r:?}");
    assert_eq!(count.load(Ordering::SeqCst), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, count) = mock(|_| (400, r#"{"status":"error","message":"invalid reactant 'C1CC'"}"#.into(), 0));
    let p = RemotePredictor::new(JsonClient::new(&url, fast_policy(3, 2000), 2).unwrap());
    let o = p.predict_smiles(&["C1CC".into(), "CCO".into()]);
    assert_eq!(o.status, OutcomeStatus::Error);
    assert!(o.message.unwrap().contains("invalid reactant"));
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn slow_replies_time_out() {
    let (url, count) = mock(|n| if n == 0 { (200, OK_REPLY.into(), 600) } else { (200, OK_REPLY.into(), 0) });
    let p = RemotePredictor::new(JsonClient::new(&url, fast_policy(2, 200), 2).unwrap());
    let o = p.predict_smiles(&["NCCO".into(), "CCCCCCCCCC(=O)O".into()]);
    assert!(o.is_ok(), "second attempt should succeed: {:?}", o.message);
    assert_eq!(count.load(Ordering::SeqCst), 2);

    let (url, _) = mock(|_| (200, OK_REPLY.into(), 600));
    let p = RemotePredictor::new(JsonClient::new(&url, fast_policy(2, 200), 2).unwrap());
    let o = p.predict_smiles(&["NCCO".into(), "CCCCCCCCCC(=O)O".into()]);
    assert_eq!(o.status, OutcomeStatus::Error);
}

#[test]
fn malformed_products_become_errors() {
    let (url, _) = mock(|_| (200, r#"{"status":"ok","products":["C(C"]}"#.into(), 0));
    let p = RemotePredictor::new(JsonClient::new(&url, fast_policy(1, 2000), 1).unwrap());
    let o = p.predict_smiles(&["NCCO".into(), "CCCCCCCCCC(=O)O".into()]);
    assert_eq!(o.status, OutcomeStatus::Error);
    assert!(o.message.unwrap().contains("invalid product"));
}

#[test]
fn remote_predictor_matches_builtin() {
    let server = spawn_server(full_service(), "127.0.0.1:0").unwrap();
    let remote = Endpoint::Remote(server.url()).predictor(TemplateEngine::default(), fast_policy(2, 5000)).unwrap();
    let engine = TemplateEngine::default();
    let pool = common::bundled_pool();
    let heads: Vec<_> = pool.heads().take(15).collect();
    let tails: Vec<_> = pool.tails().take(8).collect();
    let mut items = Vec::new();
    for h in &heads {
        for t in &tails {
            items.push(vec![h.molecule.clone(), t.molecule.clone()]);
        }
    }
    let local = engine.predict_batch(&items);
    let batch = remote.predict_batch(&items);
    assert_eq!(batch.len(), items.len());
    for (i, (l, r)) in local.iter().zip(&batch).enumerate() {
        assert_eq!(l.status, r.status, "item {i}");
        if l.is_ok() {
            assert_eq!(canonical_smiles(&l.products[0]), canonical_smiles(&r.products[0]));
        }
    }
    let single = remote.predict(&items[0]);
    assert_eq!(single.status, local[0].status);
    server.stop().unwrap();
}

#[test]
fn invalid_smiles_rejected_by_server() {
    let server = spawn_server(full_service(), "127.0.0.1:0").unwrap();
    let p = RemotePredictor::new(JsonClient::new(&server.url(), fast_policy(3, 5000), 2).unwrap());
    assert!(p.healthy());
    let o = p.predict_smiles(&["C1CC".into(), "CCCCCCCCCC(=O)O".into()]);
    assert_eq!(o.status, OutcomeStatus::Error);
    assert!(o.message.unwrap().contains("server error 400"));
    let o = p.predict_smiles(&["NCCO".into()]);
    assert!(o.message.unwrap().contains("expected 2 reactants"));
}

#[test]
fn pka_client_round_trip() {
    let server = spawn_server(full_service(), "127.0.0.1:0").unwrap();
    let remote = RemotePka::new(JsonClient::new(&server.url(), fast_policy(2, 5000), 2).unwrap());
    for s in ["CCCCCCCCCC(=O)OCCN(C)C", "OCCN(CCO)CCO", "CC(=O)O", "CCCCCC"] {
        let m = parse_smiles(s).unwrap();
        let (canon, profile) = remote.profile_canonical(&m).unwrap();
        assert_eq!(profile, assign_pka(&canon), "{s}");
        assert_eq!(remote.profile(&m).unwrap(), profile);
    }
}

#[test]
fn pka_client_rejects_impossible_sites() {
    let (url, _) = mock(|_| (200, r#"{"sites":[{"atom":0,"pka":9.0,"role":"base"}]}"#.into(), 0));
    let remote = RemotePka::new(JsonClient::new(&url, fast_policy(1, 2000), 1).unwrap());
    // atom 0 of canonical "CCN" is carbon
    let err = remote.profile(&parse_smiles("NCC").unwrap()).unwrap_err();
    assert!(err.to_string().contains("not nitrogen"), "{err}");
}

#[test]
fn score_client_round_trip() {
    let server = spawn_server(full_service(), "127.0.0.1:0").unwrap();
    let remote = RemoteScorer::new(JsonClient::new(&server.url(), fast_policy(2, 5000), 2).unwrap());
    let local = SurrogateScorer { model: PropertyModel::default() };
    let mols: Vec<_> = ["CCCCCCCCCCCC(=O)OCCN(C)CCOC(=O)CCCCCCCCCCC", "CCCCCCCCCC(=O)OCCN(C)C", "CCO"]
        .iter()
        .map(|s| parse_smiles(s).unwrap())
        .collect();
    // the server sees canonical atom order, so sums may differ in the last bit
    for (r, l) in remote.score_batch(&mols).unwrap().iter().zip(local.score_batch(&mols).unwrap()) {
        approx::assert_abs_diff_eq!(*r, l, epsilon = 1e-12);
    }
}

#[test]
fn score_client_checks_length() {
    let (url, _) = mock(|_| (200, r#"{"scores":[1.0]}"#.into(), 0));
    let remote = RemoteScorer::new(JsonClient::new(&url, fast_policy(1, 2000), 1).unwrap());
    let mols = vec![parse_smiles("CCO").unwrap(), parse_smiles("CCN").unwrap()];
    assert!(matches!(remote.score_batch(&mols), Err(ScoreError::Length { sent: 2, got: 1 })));
}

#[test]
fn missing_backends_answer_404() {
    let server = spawn_server(Service::reactions_only(Arc::new(TemplateEngine::default())), "127.0.0.1:0").unwrap();
    let c = JsonClient::new(&server.url(), fast_policy(3, 5000), 1).unwrap();
    let r: Result<serde_json::Value, _> = c.post("/api/v1/score", &serde_json::json!({"smiles": ["CCO"]}));
    assert!(matches!(r, Err(TransportError::Rejected { status: 404, .. })), "{r:?}");
}

// golden transcripts

#[derive(Debug, Serialize, Deserialize)]
struct Exchange {
    path: String,
    request: String,
    status: u16,
    response: String,
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn post_raw(base: &str, path: &str, body: &str) -> (u16, String) {
    let resp = reqwest::blocking::Client::new()
        .post(format!("{base}{path}"))
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.text().unwrap())
}

/// Requests covered by the transcripts, by file name.
const CASES: &[(&str, &str, &str)] = &[
    ("react_ester", "/api/v1/react", r#"{"reactants":["OCCN(C)C","CCCCCCCCCC(=O)O"]}"#),
    ("react_amide", "/api/v1/react", r#"{"reactants":["CCCCCCCCCC(=O)O","NCCN(C)C"],"max_products":2}"#),
    ("react_none", "/api/v1/react", r#"{"reactants":["CCCC","CCCCCC"]}"#),
    ("react_invalid_smiles", "/api/v1/react", r#"{"reactants":["C1CC","CCO"]}"#),
    ("react_arity", "/api/v1/react", r#"{"reactants":["CCO"]}"#),
    ("react_malformed", "/api/v1/react", r#"{"reactant":["CCO","CC"]}"#),
    (
        "react_batch",
        "/api/v1/react_batch",
        r#"{"items":[["OCCN(C)C","CCCCCCCCCC(=O)O"],["CCCC","CC"],["C1CC","CCO"]]}"#,
    ),
    ("pka_amine_ester", "/api/v1/pka", r#"{"smiles":"CCCCCCCCCC(=O)OCCN(C)C"}"#),
    ("pka_invalid", "/api/v1/pka", r#"{"smiles":"N(("}"#),
    ("score", "/api/v1/score", r#"{"smiles":["CCCCCCCCCCCC(=O)OCCN(C)CCOC(=O)CCCCCCCCCCC","CCO"]}"#),
    ("score_invalid", "/api/v1/score", r#"{"smiles":["CCO","C(("]}"#),
];

#[test]
fn golden_transcripts_replay() {
    let server = spawn_server(full_service(), "127.0.0.1:0").unwrap();
    let base = server.url();
    let record = std::env::var_os("LIPIDGEN_RECORD_GOLDEN").is_some();
    if record {
        std::fs::create_dir_all(golden_dir()).unwrap();
    }
    for (name, path, request) in CASES {
        let file = golden_dir().join(format!("{name}.json"));
        let (status, response) = post_raw(&base, path, request);
        if record {
            let ex = Exchange {
                path: path.to_string(),
                request: request.to_string(),
                status,
                response,
            };
            std::fs::write(&file, serde_json::to_string_pretty(&ex).unwrap() + "\n").unwrap();
            continue;
        }
        let text = std::fs::read_to_string(&file)
            .unwrap_or_else(|e| panic!("{}: {e}; record with LIPIDGEN_RECORD_GOLDEN=1", file.display()));
        let ex: Exchange = serde_json::from_str(&text).unwrap();
        assert_eq!((ex.path.as_str(), ex.request.as_str()), (*path, *request), "{name}: stale transcript");
        assert_eq!(status, ex.status, "{name}");
        assert_eq!(response, ex.response, "{name}");
    }
}
