//! Wire-level test of the remote judge protocol against a minimal local
//! HTTP server.

use featrm_core::schema::FeatureSchema;
use featrm_core::scorer::{Scorer, ScorerConfig};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// One-thread HTTP server: answers every POST with `reply`, recording the
/// request count and asserting on the request shape.
fn spawn_judge_server(reply: &'static str, hits: Arc<AtomicUsize>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = match stream {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            assert!(request_line.starts_with("POST "), "{request_line}");
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; content_length];
            reader.read_exact(&mut body).unwrap();
            let parsed: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let prompt = parsed["prompt"].as_str().expect("prompt field");
            assert!(
                prompt.contains("Reviews:"),
                "prompt missing reviews section"
            );
            hits.fetch_add(1, Ordering::SeqCst);
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: text/plain\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    format!("http://{addr}/judge")
}

#[test]
fn scores_against_a_live_http_endpoint() {
    let hits = Arc::new(AtomicUsize::new(0));
    let endpoint = spawn_judge_server("The summary deserves a 4.5 here.", hits.clone());
    let schema = FeatureSchema::default();
    let config = ScorerConfig::remote(endpoint, &schema);
    let scorer = Scorer::new(config, schema).unwrap();
    let v = scorer
        .score("Reviews praise the battery.", "The battery is praised.")
        .unwrap();
    assert!(v.values().iter().all(|&x| x == 4.5));
    assert_eq!(hits.load(Ordering::SeqCst), 7);

    // Second identical call is fully served by the cache.
    let v2 = scorer
        .score("Reviews praise the battery.", "The battery is praised.")
        .unwrap();
    assert_eq!(v, v2);
    assert_eq!(hits.load(Ordering::SeqCst), 7);
}

#[test]
fn unreachable_endpoint_fails_after_retries() {
    let schema = FeatureSchema::default();
    // Reserve a port and close it so nothing is listening.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let mut config = ScorerConfig::remote(format!("http://127.0.0.1:{port}/judge"), &schema);
    config.retry_limit = 1;
    let scorer = Scorer::new(config, schema).unwrap();
    let err = scorer.score("ctx", "cand").unwrap_err().to_string();
    assert!(err.contains("after 2 attempt(s)"), "{err}");
}
