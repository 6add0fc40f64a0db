//! The HTTP backend against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use tsprompt_core::gateway::{read_exchanges, BackendConfig, ExchangeLog, Gateway, HttpSettings};
use tsprompt_core::prompt::{PromptKind, RenderedPrompt};

struct Captured {
    headers: Vec<String>,
    body: serde_json::Value,
}

/// Serve `script` (status, body) one connection at a time and record requests.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                headers,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen, handle)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn settings(url: String, retries: u32) -> HttpSettings {
    HttpSettings {
        endpoint_url: url,
        max_retries: retries,
        backoff_base_ms: 1,
        rate_limit_per_minute: 0.0,
        request_timeout_secs: 10.0,
        api_key_env: Some("TSPROMPT_TEST_KEY_UNSET".into()),
        ..HttpSettings::default()
    }
}

fn prompt(method: PromptKind) -> RenderedPrompt {
    RenderedPrompt {
        text: "Q: values 1, 2, 3. Please answer the predicted value only.".into(),
        method,
        max_output_tokens: method.max_output_tokens(),
        sample_id: "s1".into(),
        horizon: 1,
    }
}

#[test]
fn retries_rate_limit_then_succeeds() {
    let (url, seen, server) = serve(vec![
        (429, "{\"error\":\"slow down\"}".into()),
        (503, "unavailable".into()),
        (200, ok_body("****Final Answer**** 4")),
    ]);
    let gw = Gateway::new(&BackendConfig::Http(settings(url, 3))).unwrap();
    let ex = gw.complete(&prompt(PromptKind::ZeroShotLst)).unwrap();
    server.join().unwrap();
    assert_eq!(ex.raw_response, "****Final Answer**** 4");
    assert_eq!(ex.attempt_count, 3);
    assert!(ex.is_success());

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    let body = &seen[0].body;
    assert_eq!(body["model"], "gpt-4o-mini-2024-07-18");
    assert_eq!(body["max_tokens"], 1280);
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"].as_array().unwrap().len(), 1);
    assert_eq!(body["messages"][0]["role"], "user");
    assert!(body["messages"][0]["content"].as_str().unwrap().starts_with("Q: values"));
    assert!(!seen[0].headers.iter().any(|h| h.to_ascii_lowercase().starts_with("authorization")));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen, server) = serve(vec![(400, "{\"error\":\"bad request\"}".into())]);
    let gw = Gateway::new(&BackendConfig::Http(settings(url, 3))).unwrap();
    let ex = gw.complete(&prompt(PromptKind::Baseline)).unwrap();
    server.join().unwrap();
    assert_eq!(ex.attempt_count, 1);
    assert!(ex.error.as_deref().unwrap().contains("400"));
    assert_eq!(seen.lock().unwrap()[0].body["max_tokens"], 1024);
}

#[test]
fn exhausted_retries_are_logged_as_failures() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("ex.jsonl");
    let (url, seen, server) = serve(vec![(500, "boom".into()), (500, "boom".into()), (500, "boom".into())]);
    let gw = Gateway::new(&BackendConfig::Http(settings(url, 2)))
        .unwrap()
        .with_log(ExchangeLog::open(&log_path).unwrap());
    let ex = gw.complete(&prompt(PromptKind::Baseline)).unwrap();
    server.join().unwrap();
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert_eq!(ex.attempt_count, 3);
    assert!(ex.error.as_deref().unwrap().starts_with("retries exhausted"));
    let logged = read_exchanges(&log_path).unwrap();
    assert_eq!(logged, vec![ex]);
}

#[test]
fn malformed_success_body_is_fatal() {
    let (url, _, server) = serve(vec![(200, "{\"choices\": []}".into())]);
    let gw = Gateway::new(&BackendConfig::Http(settings(url, 3))).unwrap();
    let ex = gw.complete(&prompt(PromptKind::Baseline)).unwrap();
    server.join().unwrap();
    assert_eq!(ex.attempt_count, 1);
    assert!(!ex.is_success());
}

#[test]
fn sends_bearer_token_from_configured_variable() {
    std::env::set_var("TSPROMPT_TEST_KEY_SET", "sk-test-123");
    let (url, seen, server) = serve(vec![(200, ok_body("7"))]);
    let mut s = settings(url, 0);
    s.api_key_env = Some("TSPROMPT_TEST_KEY_SET".into());
    let gw = Gateway::new(&BackendConfig::Http(s)).unwrap();
    gw.complete(&prompt(PromptKind::Baseline)).unwrap();
    server.join().unwrap();
    let seen = seen.lock().unwrap();
    assert!(seen[0].headers.iter().any(|h| h == "authorization: Bearer sk-test-123"
        || h == "Authorization: Bearer sk-test-123"));
}

#[test]
fn unreachable_endpoint_fails_without_panicking() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gw = Gateway::new(&BackendConfig::Http(settings(format!("http://127.0.0.1:{port}/x"), 1))).unwrap();
    let ex = gw.complete(&prompt(PromptKind::Baseline)).unwrap();
    assert_eq!(ex.attempt_count, 2);
    assert!(ex.error.as_deref().unwrap().contains("transport"));
}

#[test]
fn invalid_settings_are_rejected_up_front() {
    let mut s = settings("http://127.0.0.1:9/x".into(), 1);
    s.request_timeout_secs = 0.0;
    assert!(Gateway::new(&BackendConfig::Http(s)).is_err());
}
