//! Remote backends against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use capr::backends::{
    GeneratorBackend, RemoteClient, RemoteGenerator, RemoteReformulator, RemoteScorer, RemoteSimilarity,
    ReformulatorBackend, ScorerBackend, TextSimilarity,
};
use capr::capability::{parse_meta_prompt, CapabilityCondition};
use capr::CaprError;

struct Stub {
    url: String,
    bodies: Arc<Mutex<Vec<String>>>,
}

/// Serves one scripted `(status, body)` per connection, in order, then stops.
fn serve(script: Vec<(u16, String)>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/api", listener.local_addr().unwrap());
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = bodies.clone();
    thread::spawn(move || {
        for (status, body) in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut req = vec![0u8; len];
            reader.read_exact(&mut req).unwrap();
            seen.lock().unwrap().push(String::from_utf8(req).unwrap());
            let mut stream = reader.into_inner();
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    Stub { url, bodies }
}

fn client() -> RemoteClient {
    RemoteClient::new(Duration::from_secs(5), 3, Duration::from_millis(5)).unwrap()
}

#[test]
fn happy_path_for_every_backend() {
    let stub = serve(vec![
        (200, r#"{"image_id": "img-1"}"#.into()),
        (200, r#"{"overall": 0.5, "similarity": 0.6, "aesthetic": 0.4}"#.into()),
        (200, r#"{"similarity": 0.25}"#.into()),
        (200, r#"{"output": "a cat, detailed"}"#.into()),
    ]);
    let gen = RemoteGenerator::new(client(), stub.url.clone());
    let img = gen.generate("a cat", 7, 20).unwrap();
    assert_eq!(img.image_id, "img-1");
    let sc = RemoteScorer::new(client(), stub.url.clone());
    let s = sc.score("a cat", &img).unwrap();
    assert_eq!((s.overall, s.similarity, s.aesthetic), (0.5, 0.6, 0.4));
    let sim = RemoteSimilarity::new(client(), stub.url.clone());
    assert_eq!(sim.similarity("a", "b").unwrap(), 0.25);
    let rf = RemoteReformulator::new(client(), stub.url.clone());
    let cond = CapabilityCondition::from_parts((1, 2, 3), (4, 5, 6), 7);
    assert_eq!(rf.reformulate("a cat", &cond).unwrap(), "a cat, detailed");

    let bodies = stub.bodies.lock().unwrap().clone();
    let gen_req: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(gen_req, serde_json::json!({"prompt": "a cat", "seed": 7, "steps": 20}));
    let score_req: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(score_req, serde_json::json!({"prompt": "a cat", "image_id": "img-1"}));
    let sim_req: serde_json::Value = serde_json::from_str(&bodies[2]).unwrap();
    assert_eq!(sim_req, serde_json::json!({"text_a": "a", "text_b": "b"}));
    let rf_req: serde_json::Value = serde_json::from_str(&bodies[3]).unwrap();
    let (prompt, parsed) = parse_meta_prompt(rf_req["input"].as_str().unwrap()).unwrap();
    assert_eq!((prompt.as_str(), parsed), ("a cat", cond));
}

#[test]
fn server_errors_are_retried_then_reported() {
    let stub = serve(vec![(500, "{}".into()), (500, "{}".into()), (500, "{}".into())]);
    let gen = RemoteGenerator::new(client(), stub.url.clone());
    match gen.generate("a cat", 0, 20) {
        Err(CaprError::HttpStatus { status: 500, attempts: 3, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(stub.bodies.lock().unwrap().len(), 3);
}

#[test]
fn transient_failure_then_success() {
    let stub = serve(vec![(503, "{}".into()), (200, r#"{"similarity": 0.5}"#.into())]);
    let sim = RemoteSimilarity::new(client(), stub.url.clone());
    assert_eq!(sim.similarity("x", "y").unwrap(), 0.5);
}

#[test]
fn malformed_json_is_a_decode_error_without_retry() {
    let stub = serve(vec![(200, "not json".into()), (200, r#"{"image_id": "late"}"#.into())]);
    let gen = RemoteGenerator::new(client(), stub.url.clone());
    assert!(matches!(gen.generate("a cat", 0, 20), Err(CaprError::Decode { .. })));
    assert_eq!(stub.bodies.lock().unwrap().len(), 1);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = serve(vec![(404, "{}".into()), (200, "{}".into())]);
    let sc = RemoteSimilarity::new(client(), stub.url.clone());
    assert!(matches!(sc.similarity("a", "b"), Err(CaprError::HttpStatus { status: 404, attempts: 1, .. })));
    assert_eq!(stub.bodies.lock().unwrap().len(), 1);
}

#[test]
fn out_of_range_similarity_is_rejected() {
    let stub = serve(vec![(200, r#"{"similarity": 1.5}"#.into())]);
    let sim = RemoteSimilarity::new(client(), stub.url.clone());
    assert!(matches!(sim.similarity("a", "b"), Err(CaprError::Decode { .. })));
}

#[test]
fn unreachable_endpoint_is_a_backend_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gen = RemoteGenerator::new(client(), format!("http://127.0.0.1:{port}/api"));
    assert!(matches!(gen.generate("a", 0, 1), Err(CaprError::Backend { .. })));
}
