use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crowdshield_core::text_encoder::{
    encode_batch_external, EncoderConfig, EncoderKind, ExternalEncoder,
};
use crowdshield_core::{EncoderError, TextEncoder};

#[derive(Clone, Copy)]
enum Mode {
    /// Vector `[len(text), 0, 0, ...]` per text.
    Echo,
    ExtraVector,
    ShortVectors,
    Status500,
    Slow,
    Garbage,
}

struct Server {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<Vec<String>> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().ok()?;
        }
        if line == "\r\n" {
            break;
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    let v: serde_json::Value = serde_json::from_slice(&body).ok()?;
    Some(
        v["texts"]
            .as_array()?
            .iter()
            .map(|t| t.as_str().unwrap_or_default().to_string())
            .collect(),
    )
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let _ = write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}

fn serve(mode: Mode, dim: usize) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let counter = counter.clone();
            std::thread::spawn(move || {
                let Some(texts) = read_request(&mut stream) else {
                    return;
                };
                counter.fetch_add(1, Ordering::SeqCst);
                let vectors = |n: usize, d: usize| -> String {
                    let rows: Vec<Vec<f64>> = (0..n)
                        .map(|i| {
                            let mut v = vec![0.0; d];
                            if d > 0 {
                                v[0] = texts.get(i).map_or(0.0, |t| t.len() as f64);
                            }
                            v
                        })
                        .collect();
                    serde_json::json!({ "vectors": rows }).to_string()
                };
                match mode {
                    Mode::Echo => respond(&mut stream, "200 OK", &vectors(texts.len(), dim)),
                    Mode::ExtraVector => {
                        respond(&mut stream, "200 OK", &vectors(texts.len() + 1, dim))
                    }
                    Mode::ShortVectors => {
                        respond(&mut stream, "200 OK", &vectors(texts.len(), dim / 2))
                    }
                    Mode::Status500 => respond(&mut stream, "500 Internal Server Error", "{}"),
                    Mode::Slow => {
                        std::thread::sleep(Duration::from_secs(3));
                        respond(&mut stream, "200 OK", &vectors(texts.len(), dim));
                    }
                    Mode::Garbage => respond(&mut stream, "200 OK", "not json"),
                }
            });
        }
    });
    Server { url, hits }
}

fn client(url: &str, dim: usize) -> ExternalEncoder {
    ExternalEncoder::new(EncoderConfig {
        kind: EncoderKind::External,
        dim,
        endpoint: Some(url.to_string()),
        batch_size: 3,
        timeout_secs: 0.5,
        max_in_flight: 4,
        ..Default::default()
    })
    .unwrap()
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| "x".repeat(i + 1)).collect()
}

#[test]
fn empty_input_sends_nothing() {
    let srv = serve(Mode::Echo, 4);
    let enc = client(&srv.url, 4);
    assert!(encode_batch_external(&enc, &[]).unwrap().is_empty());
    assert_eq!(srv.hits.load(Ordering::SeqCst), 0);
}

#[test]
fn order_is_preserved_across_concurrent_batches() {
    let srv = serve(Mode::Echo, 4);
    let enc = client(&srv.url, 4);
    let input = texts(20);
    let out = encode_batch_external(&enc, &input).unwrap();
    let lens: Vec<f64> = out.iter().map(|e| e.values[0]).collect();
    let want: Vec<f64> = (1..=20).map(|n| n as f64).collect();
    assert_eq!(lens, want);
    assert_eq!(srv.hits.load(Ordering::SeqCst), 7);
    assert_eq!(enc.encode("abc").unwrap().values, vec![3.0, 0.0, 0.0, 0.0]);
}

#[test]
fn contract_violations_are_distinct_errors() {
    let enc = client(&serve(Mode::ExtraVector, 4).url, 4);
    assert!(matches!(
        encode_batch_external(&enc, &texts(2)),
        Err(EncoderError::CountMismatch {
            expected: 2,
            got: 3
        })
    ));
    let enc = client(&serve(Mode::ShortVectors, 256).url, 256);
    assert!(matches!(
        encode_batch_external(&enc, &texts(2)),
        Err(EncoderError::DimMismatch {
            expected: 256,
            got: 128
        })
    ));
    let enc = client(&serve(Mode::Status500, 4).url, 4);
    assert!(matches!(
        encode_batch_external(&enc, &texts(1)),
        Err(EncoderError::Status(500))
    ));
    let enc = client(&serve(Mode::Garbage, 4).url, 4);
    assert!(matches!(
        encode_batch_external(&enc, &texts(1)),
        Err(EncoderError::Malformed(_))
    ));
}

#[test]
fn slow_server_times_out() {
    let enc = client(&serve(Mode::Slow, 4).url, 4);
    assert!(matches!(enc.encode("a"), Err(EncoderError::Timeout)));
}

#[test]
fn unreachable_endpoint_is_network_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let enc = client(&format!("http://127.0.0.1:{port}/embed"), 4);
    assert!(matches!(enc.encode("a"), Err(EncoderError::Network(_))));
}
