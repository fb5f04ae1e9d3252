//! The HTTP client against a scripted in-process server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use clsec::semantic::{
    ContextToken, FillRequest, NgramModel, RemoteConfig, RemoteModel, SemanticError, SemanticModel, WithFallback,
};
use clsec::masker::Vocabulary;

struct Reply {
    status: u16,
    body: String,
}

fn reply(status: u16, body: &str) -> Reply {
    Reply {
        status,
        body: body.to_string(),
    }
}

struct Seen {
    method: String,
    path: String,
    body: String,
}

fn read_request(stream: &mut TcpStream) -> Seen {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut content_length = 0;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; content_length];
    reader.read_exact(&mut body).unwrap();
    Seen {
        method,
        path,
        body: String::from_utf8(body).unwrap(),
    }
}

/// Serves `replies` in order, one per connection, and records the requests.
fn serve(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for r in replies {
            let (mut stream, _) = listener.accept().unwrap();
            log.lock().unwrap().push(read_request(&mut stream));
            let text = format!(
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                r.status,
                r.body.len(),
                r.body
            );
            stream.write_all(text.as_bytes()).unwrap();
        }
    });
    (addr, seen)
}

fn dead_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    addr
}

fn model(endpoint: &str) -> RemoteModel {
    let mut config = RemoteConfig::new(endpoint);
    config.timeout = Duration::from_secs(5);
    RemoteModel::new(config)
}

fn words(ws: &[&str]) -> Vec<Vec<u8>> {
    ws.iter().map(|w| w.as_bytes().to_vec()).collect()
}

fn context() -> Vec<ContextToken<'static>> {
    vec![ContextToken::Word(b"the"), ContextToken::Mask, ContextToken::Word(b"sat")]
}

#[test]
fn scores_with_floor_for_missing() {
    let (url, seen) = serve(vec![reply(
        200,
        r#"{"candidates":[{"word":"cat","log_prob":-1.0},{"word":"cot","log_prob":-4.5}],"model_id":"mock"}"#,
    )]);
    let scores = model(&url).score(&context(), 1, &words(&["cat", "cot", "dog"])).unwrap();
    assert_eq!(scores[b"cat".as_slice()], -1.0);
    assert_eq!(scores[b"cot".as_slice()], -4.5);
    assert_eq!(scores[b"dog".as_slice()], -14.5);

    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].method, "POST");
    assert_eq!(seen[0].path, "/v1/fill");
    let req: FillRequest = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(req.tokens, ["the", "<mask>", "sat"]);
    assert_eq!(req.mask_index, 1);
    assert_eq!(req.byte_length, Some(3));
    assert_eq!(req.top_k, 32);
    assert_eq!(req.candidates, None);
}

#[test]
fn forced_scoring_sends_candidates() {
    let (url, seen) = serve(vec![reply(200, r#"{"candidates":[{"word":"dog","log_prob":-2.0},{"word":"cat","log_prob":-3.0}]}"#)]);
    let mut config = RemoteConfig::new(&url);
    config.forced = true;
    let scores = RemoteModel::new(config).score(&context(), 1, &words(&["cat", "dog"])).unwrap();
    assert_eq!(scores[b"dog".as_slice()], -2.0);
    let req: FillRequest = serde_json::from_str(&seen.lock().unwrap()[0].body).unwrap();
    assert_eq!(req.candidates.unwrap(), ["cat", "dog"]);
    assert_eq!(req.top_k, 2);
}

#[test]
fn retries_once_after_server_error() {
    let (url, seen) = serve(vec![
        reply(503, r#"{"detail":"loading"}"#),
        reply(200, r#"{"candidates":[{"word":"cat","log_prob":-0.5}],"model_id":"m"}"#),
    ]);
    let scores = model(&url).score(&context(), 1, &words(&["cat"])).unwrap();
    assert_eq!(scores[b"cat".as_slice()], -0.5);
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn two_server_errors_mean_unavailable() {
    let (url, _) = serve(vec![reply(500, "{}"), reply(502, "{}")]);
    let err = model(&url).score(&context(), 1, &words(&["cat"])).unwrap_err();
    assert!(matches!(err, SemanticError::RemoteUnavailable(_)), "{err}");
}

#[test]
fn unsatisfiable_constraints_give_uniform_scores() {
    let (url, _) = serve(vec![reply(422, r#"{"detail":"no candidates"}"#)]);
    let scores = model(&url).score(&context(), 1, &words(&["cat", "dog"])).unwrap();
    assert_eq!(scores[b"cat".as_slice()], -10.0);
    assert_eq!(scores[b"dog".as_slice()], -10.0);
}

#[test]
fn client_errors_are_protocol_errors() {
    let (url, _) = serve(vec![reply(400, r#"{"detail":"bad"}"#)]);
    let err = model(&url).score(&context(), 1, &words(&["cat"])).unwrap_err();
    assert!(matches!(err, SemanticError::Protocol(_)), "{err}");

    let (url, _) = serve(vec![reply(200, "not json")]);
    let err = model(&url).score(&context(), 1, &words(&["cat"])).unwrap_err();
    assert!(matches!(err, SemanticError::Protocol(_)), "{err}");
}

#[test]
fn unreachable_service() {
    let err = model(&dead_endpoint()).score(&context(), 1, &words(&["cat"])).unwrap_err();
    assert!(matches!(err, SemanticError::RemoteUnavailable(_)), "{err}");
    assert!(model(&dead_endpoint()).health().is_err());
}

#[test]
fn fallback_to_ngram() {
    let vocab = Vocabulary::from_words(["the", "cat", "dog", "sat"]);
    let corpus = [vec!["the", "cat", "sat"]];
    let ngram = NgramModel::train(corpus.iter().map(Vec::as_slice), &vocab, 0.01);
    let expected = ngram.score(&context(), 1, &words(&["cat", "dog"])).unwrap();
    let combined = WithFallback {
        primary: model(&dead_endpoint()),
        fallback: ngram,
    };
    assert_eq!(combined.score(&context(), 1, &words(&["cat", "dog"])).unwrap(), expected);
}

#[test]
fn health_check() {
    let (url, seen) = serve(vec![reply(200, r#"{"status":"ok","model_id":"mock"}"#)]);
    assert!(model(&url).health().unwrap().contains("ok"));
    let seen = seen.lock().unwrap();
    assert_eq!((seen[0].method.as_str(), seen[0].path.as_str()), ("GET", "/health"));
}
