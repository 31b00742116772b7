//! Exercises the HTTP encoder client against a minimal in-process server
//! speaking the `{"texts": [...]}` -> `[[f64; d]]` wire format.

use std::io::{Read, Write};
use std::net::TcpListener;

use ldfs_text::{HttpTextEncoder, TextEncoder};

/// One-shot HTTP server returning a fixed JSON body per request.
fn serve_once(listener: TcpListener, body: String) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = vec![0u8; 65536];
        let mut req = Vec::new();
        loop {
            let n = stream.read(&mut buf).unwrap();
            req.extend_from_slice(&buf[..n]);
            let text = String::from_utf8_lossy(&req);
            if let Some(header_end) = text.find("\r\n\r\n") {
                let content_len = text
                    .lines()
                    .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                    .unwrap_or(0);
                if req.len() >= header_end + 4 + content_len {
                    break;
                }
            }
        }
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            body.len(),
            body
        );
        stream.write_all(response.as_bytes()).unwrap();
        String::from_utf8_lossy(&req).into_owned()
    })
}

#[test]
fn http_encoder_posts_texts_and_normalizes_reply() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = serve_once(listener, "[[3.0, 4.0, 0.0]]".to_string());

    let encoder = HttpTextEncoder::new(format!("http://{addr}/encode"), 3);
    let v = encoder.encode("a real photo of a dog.").unwrap();
    assert!((v.as_slice()[0] - 0.6).abs() < 1e-12);
    assert!((v.as_slice()[1] - 0.8).abs() < 1e-12);

    let request = handle.join().unwrap();
    assert!(request.contains(r#"{"texts":["a real photo of a dog."]}"#));
}

#[test]
fn http_encoder_rejects_wrong_dimension() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let _handle = serve_once(listener, "[[1.0, 0.0]]".to_string());

    let encoder = HttpTextEncoder::new(format!("http://{addr}/encode"), 3);
    assert!(encoder.encode("anything").is_err());
}

#[test]
fn env_constructor_requires_variable() {
    // The variable is unset in the test environment, so no client appears.
    if std::env::var(ldfs_text::TEXT_ENCODER_URL_ENV).is_err() {
        assert!(HttpTextEncoder::from_env(8).is_none());
    }
}
