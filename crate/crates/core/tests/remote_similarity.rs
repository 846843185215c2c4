use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use ideation_core::similarity::{
    reference_score, RemoteError, RemoteProvider, ScoreRequest, SimilarityProvider,
};

/// One-shot HTTP server. Sends the parsed request body back over the
/// channel and answers with `status` and `body` after `delay`.
fn mock(
    status: u16,
    body: &'static str,
    delay: Duration,
) -> (String, mpsc::Receiver<ScoreRequest>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        assert!(request_line.starts_with("POST /score "), "{request_line}");
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut payload = vec![0; length];
        reader.read_exact(&mut payload).unwrap();
        let _ = tx.send(serde_json::from_slice(&payload).unwrap());
        thread::sleep(delay);
        let mut stream = stream;
        let _ = write!(
            stream,
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
    });
    (url, rx)
}

const POOL: [&str; 2] = ["washable cotton mask", "glowing face shield"];

fn reference() -> Vec<f64> {
    POOL.iter()
        .map(|p| reference_score("washable mask", p).value())
        .collect()
}

fn values(provider: &RemoteProvider) -> Vec<f64> {
    provider
        .score_many("washable mask", &POOL)
        .iter()
        .map(|s| s.value())
        .collect()
}

#[test]
fn posts_query_and_pool() {
    let (url, rx) = mock(200, r#"{"scores":[4.5,7.0]}"#, Duration::ZERO);
    let provider = RemoteProvider::new(&format!("{url}/"), Duration::from_secs(2)).unwrap();
    // out-of-range scores are clamped onto the scale
    assert_eq!(values(&provider), [4.5, 5.0]);
    let sent = rx.recv().unwrap();
    assert_eq!(sent.query, "washable mask");
    assert_eq!(sent.pool, POOL);
}

#[test]
fn wrong_length_falls_back() {
    let (url, _rx) = mock(200, r#"{"scores":[1.0]}"#, Duration::ZERO);
    let provider = RemoteProvider::new(&url, Duration::from_secs(2)).unwrap();
    assert!(matches!(
        provider.try_score_many("washable mask", &POOL),
        Err(RemoteError::LengthMismatch {
            expected: 2,
            got: 1
        })
    ));
    let (url, _rx) = mock(200, r#"{"scores":[1.0]}"#, Duration::ZERO);
    let provider = RemoteProvider::new(&url, Duration::from_secs(2)).unwrap();
    assert_eq!(values(&provider), reference());
}

#[test]
fn server_error_falls_back() {
    let (url, _rx) = mock(500, r#"{"detail":"boom"}"#, Duration::ZERO);
    let provider = RemoteProvider::new(&url, Duration::from_secs(2)).unwrap();
    assert_eq!(values(&provider), reference());
}

#[test]
fn slow_service_times_out() {
    let (url, _rx) = mock(200, r#"{"scores":[1.0,1.0]}"#, Duration::from_millis(800));
    let provider = RemoteProvider::new(&url, Duration::from_millis(200)).unwrap();
    assert_eq!(values(&provider), reference());
}

#[test]
fn unreachable_service_falls_back() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let provider = RemoteProvider::new(
        &format!("http://127.0.0.1:{port}"),
        Duration::from_millis(500),
    )
    .unwrap();
    assert_eq!(values(&provider), reference());
    assert!(provider.score_many("anything", &[]).is_empty());
}
