use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use bbo_core::backend::{Backend, CompletionRequest, RequestParams};
use bbo_harness::live::LiveBackend;
use serde_json::Value;

type Seen = Arc<Mutex<Vec<(String, Value)>>>;

/// Serves `replies` (status, body) in order and records each request body
/// with its authorization header.
fn serve(replies: Vec<(u16, String)>) -> (String, Seen) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line["authorization:".len()..].trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock()
                .unwrap()
                .push((auth, serde_json::from_slice(&buf).unwrap()));
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"total_tokens": 42}
    })
    .to_string()
}

#[test]
fn posts_chat_completions_and_reads_the_reply() {
    let (url, seen) = serve(vec![(200, ok_body(r#"{"x": 0.1, "y": 0.2}"#))]);
    let backend = LiveBackend::new(&url, "secret".into(), 100.0, Duration::from_secs(5));
    let params = RequestParams {
        model: "some-model".into(),
        ..RequestParams::default()
    };
    let reply = backend
        .complete(&CompletionRequest::user(&params, "hello", Some(9)))
        .unwrap();
    assert_eq!(reply.text, r#"{"x": 0.1, "y": 0.2}"#);
    assert_eq!(reply.usage_tokens, 42);
    let seen = seen.lock().unwrap();
    let (auth, body) = &seen[0];
    assert_eq!(auth, "Bearer secret");
    assert_eq!(body["model"], "some-model");
    assert_eq!(body["messages"][0]["content"], "hello");
    assert_eq!(body["seed"], 9);
}

#[test]
fn retries_transient_failures() {
    let (url, seen) = serve(vec![
        (500, "{}".into()),
        (503, "{}".into()),
        (200, ok_body("third time")),
    ]);
    let backend = LiveBackend::new(&url, "k".into(), 100.0, Duration::from_secs(5))
        .with_backoff(Duration::from_millis(1));
    let reply = backend
        .complete(&CompletionRequest::user(&RequestParams::default(), "hi", None))
        .unwrap();
    assert_eq!(reply.text, "third time");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_three_attempts() {
    let (url, seen) = serve(vec![
        (500, "{}".into()),
        (500, "{}".into()),
        (200, "{\"choices\": []}".into()),
    ]);
    let backend = LiveBackend::new(&url, "k".into(), 100.0, Duration::from_secs(5))
        .with_backoff(Duration::from_millis(1));
    let err = backend
        .complete(&CompletionRequest::user(&RequestParams::default(), "hi", None))
        .unwrap_err();
    assert!(matches!(err, bbo_core::Error::BackendUnavailable(_)), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 3);
}
