use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;

/// Fails the test if any network call is attempted.
struct Sentinel(AtomicUsize);

impl Transport for Sentinel {
    fn send(&self, _req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Network("sentinel transport hit".into()))
    }
}

struct Echo(AtomicUsize);

impl Transport for Echo {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(ChatResponse { text: format!("echo:{}", req.prompt), prompt_tokens: 3, completion_tokens: 2 })
    }
}

fn config(mode: GatewayMode, cassette: Option<PathBuf>) -> GatewayConfig {
    GatewayConfig { mode, cassette, backoff_ms: 1, retries: 2, ..GatewayConfig::default() }
}

#[test]
fn record_dedups_and_replay_is_hermetic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let echo = Arc::new(Echo(AtomicUsize::new(0)));
    let gw = Gateway::with_transport(config(GatewayMode::Record, Some(path.clone())), echo.clone()).unwrap();
    let a = gw.complete(Stage::Generation, "hello").unwrap();
    let b = gw.complete(Stage::Generation, "hello").unwrap();
    assert_eq!(a.text, b.text);
    assert_eq!(echo.0.load(Ordering::SeqCst), 1);
    let lines = std::fs::read_to_string(&path).unwrap();
    assert_eq!(lines.lines().count(), 2, "header plus one entry");

    let sentinel = Arc::new(Sentinel(AtomicUsize::new(0)));
    let gw = Gateway::with_transport(config(GatewayMode::Replay, Some(path)), sentinel.clone()).unwrap();
    assert_eq!(gw.complete(Stage::Generation, "hello").unwrap().text, "echo:hello");
    let miss = gw.complete(Stage::Generation, "unknown");
    assert!(matches!(miss, Err(GatewayError::CassetteMiss { .. })));
    assert_eq!(sentinel.0.load(Ordering::SeqCst), 0);
    assert_eq!(gw.ledger().total().failures, 1);
}

#[test]
fn failures_are_charged_after_retries() {
    let sentinel = Arc::new(Sentinel(AtomicUsize::new(0)));
    let gw = Gateway::with_transport(config(GatewayMode::Live, None), sentinel.clone()).unwrap();
    let err = gw.complete(Stage::Evaluation, "abcdefgh").unwrap_err();
    assert!(matches!(err, GatewayError::Transport { attempts: 3, .. }));
    assert_eq!(sentinel.0.load(Ordering::SeqCst), 3);
    let entries = gw.ledger().entries();
    assert_eq!(entries.len(), 1);
    assert_eq!((entries[0].prompt_tokens, entries[0].completion_tokens, entries[0].ok), (2, 0, false));
}

#[test]
fn ledger_totals_survive_concurrency() {
    let echo = Arc::new(Echo(AtomicUsize::new(0)));
    let gw = Arc::new(Gateway::with_transport(GatewayConfig { concurrency: 4, ..config(GatewayMode::Live, None) }, echo).unwrap());
    std::thread::scope(|s| {
        for t in 0..8 {
            let gw = gw.clone();
            s.spawn(move || {
                for i in 0..25 {
                    gw.complete(Stage::Formulation, &format!("{t}-{i}")).unwrap();
                }
            });
        }
    });
    let total = gw.ledger().total();
    assert_eq!(total.calls, 200);
    assert_eq!(total.prompt_tokens, 600);
    assert_eq!(gw.ledger().by_stage()[&Stage::Formulation], total);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(GatewayConfig { temperature: -1.0, ..GatewayConfig::default() }.validate().is_err());
    assert!(GatewayConfig { concurrency: 0, ..GatewayConfig::default() }.validate().is_err());
    assert!(GatewayConfig { timeout_secs: 0.0, ..GatewayConfig::default() }.validate().is_err());
    assert!(config(GatewayMode::Replay, None).validate().is_err());
}

/// Minimal HTTP server answering a fixed sequence of (status, body) replies.
fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            bodies.push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            write!(stream, "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len())
                .unwrap();
        }
        bodies
    });
    (url, handle)
}

#[test]
fn http_transport_retries_server_errors() {
    let ok = r#"{"choices":[{"message":{"role":"assistant","content":"SELECT 1"}}],"usage":{"prompt_tokens":11,"completion_tokens":4}}"#;
    let (url, handle) = serve(vec![(500, "{}".into()), (200, ok.into())]);
    let gw = Gateway::new(GatewayConfig { endpoint: url, ..config(GatewayMode::Live, None) }).unwrap();
    let c = gw.complete(Stage::Generation, "q").unwrap();
    assert_eq!(c.text, "SELECT 1");
    assert_eq!((c.usage.prompt_tokens, c.usage.completion_tokens), (11, 4));
    let bodies = handle.join().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["messages"][0]["content"], "q");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, handle) = serve(vec![(400, r#"{"error":"bad"}"#.into())]);
    let gw = Gateway::new(GatewayConfig { endpoint: url, ..config(GatewayMode::Live, None) }).unwrap();
    let err = gw.complete(Stage::Generation, "q").unwrap_err();
    assert!(matches!(err, GatewayError::Transport { attempts: 1, .. }), "{err}");
    handle.join().unwrap();
}
