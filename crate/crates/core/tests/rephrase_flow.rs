//! Cache, retry and transport behaviour of the rephrase stage.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use tmr_core::corpus::RawDocument;
use tmr_core::rephrase::{
    ApiStyle, CompletionRequest, HttpProvider, Limits, Provider, ProviderConfig, ProviderError,
    RephraseCache, RephraseEntry, RephraseScheme, Rephraser,
};

struct Counting {
    calls: AtomicUsize,
}

impl Provider for Counting {
    fn id(&self) -> &str {
        "counting"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(format!("  \"{}.\"  ", request.document.to_uppercase()))
    }
}

fn docs(n: usize) -> Vec<RawDocument> {
    (0..n)
        .map(|i| RawDocument::new(format!("d{i}"), format!("text number {i}")))
        .collect()
}

fn fast() -> Limits {
    Limits {
        max_retries: 2,
        backoff: Duration::from_millis(1),
        requests_per_minute: 0,
        max_in_flight: 3,
    }
}

#[test]
fn warm_cache_makes_no_calls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let corpus = docs(10);
    let provider = Counting { calls: AtomicUsize::new(0) };

    let first = {
        let cache = RephraseCache::open(&path).unwrap();
        Rephraser::new(&provider, &cache, fast()).rephrase_corpus(&corpus, RephraseScheme::General)
    };
    assert_eq!(provider.calls.load(Ordering::SeqCst), 10);
    assert!(first.failed_ids.is_empty());
    for (entry, doc) in first.entries.iter().zip(&corpus) {
        let RephraseEntry::Ok(r) = entry else { panic!("failed entry") };
        assert!(!r.from_cache, "first occurrence must not be marked cached");
        assert_eq!(r.doc_id, doc.id);
        assert_eq!(r.rephrased, format!("{}.", doc.text.to_uppercase()));
    }

    let cache = RephraseCache::open(&path).unwrap();
    let second = Rephraser::new(&provider, &cache, fast()).rephrase_corpus(&corpus, RephraseScheme::General);
    assert_eq!(provider.calls.load(Ordering::SeqCst), 10, "warm cache must not call the provider");
    assert_eq!(second.cache_hits(), 10);
    let texts = |c: &tmr_core::rephrase::CorpusRephrase| c.documents(&corpus, false);
    assert_eq!(texts(&first), texts(&second));

    // another scheme is a different key
    Rephraser::new(&provider, &cache, fast()).rephrase_corpus(&corpus[..2], RephraseScheme::ColloquialToFormal);
    assert_eq!(provider.calls.load(Ordering::SeqCst), 12);

    // changed text invalidates the entry
    let mut edited = corpus[..1].to_vec();
    edited[0].text.push('!');
    Rephraser::new(&provider, &cache, fast()).rephrase_corpus(&edited, RephraseScheme::General);
    assert_eq!(provider.calls.load(Ordering::SeqCst), 13);
}

struct Flaky {
    fail_first: usize,
    status: u16,
    calls: AtomicUsize,
}

impl Provider for Flaky {
    fn id(&self) -> &str {
        "flaky"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if n < self.fail_first {
            Err(ProviderError::Http { status: self.status, body: String::new() })
        } else {
            Ok(request.document.to_owned())
        }
    }
}

#[test]
fn retry_policy() {
    let cache = RephraseCache::in_memory();
    let doc = &docs(1)[0];

    let p = Flaky { fail_first: 2, status: 503, calls: AtomicUsize::new(0) };
    let r = Rephraser::new(&p, &cache, fast()).rephrase_one(doc, RephraseScheme::General);
    assert!(r.is_ok());
    assert_eq!(p.calls.load(Ordering::SeqCst), 3);

    let cache = RephraseCache::in_memory();
    let p = Flaky { fail_first: 5, status: 429, calls: AtomicUsize::new(0) };
    assert!(Rephraser::new(&p, &cache, fast()).rephrase_one(doc, RephraseScheme::General).is_err());
    assert_eq!(p.calls.load(Ordering::SeqCst), 3, "one try plus max_retries");
    assert!(cache.is_empty(), "failures are never cached");

    let p = Flaky { fail_first: 5, status: 400, calls: AtomicUsize::new(0) };
    assert!(Rephraser::new(&p, &cache, fast()).rephrase_one(doc, RephraseScheme::General).is_err());
    assert_eq!(p.calls.load(Ordering::SeqCst), 1, "client errors are not retried");
}

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: String,
}

/// Serves the given (status, body) responses, one per connection.
fn mock_server(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_owned();
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
                request_line: request_line.trim_end().to_owned(),
                headers,
                body: String::from_utf8(buf).unwrap(),
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
    (addr, seen, handle)
}

#[test]
fn gemini_over_http() {
    let reply = r#"{"candidates":[{"content":{"parts":[{"text":"Formal text."}]}}]}"#;
    let (addr, seen, handle) = mock_server(vec![(503, "busy".into()), (200, reply.into())]);
    let config = ProviderConfig {
        style: ApiStyle::Gemini,
        endpoint: format!("{addr}/v1beta"),
        model: "test-model".into(),
        retry_backoff_ms: 1,
        ..ProviderConfig::default()
    };
    let provider = HttpProvider::with_key(config.clone(), "k-123".into()).unwrap();
    let cache = RephraseCache::in_memory();
    let limits = Limits { requests_per_minute: 0, ..Limits::from(&config) };
    let doc = RawDocument::new("1", "gonna be late lol");
    let record = Rephraser::new(&provider, &cache, limits)
        .rephrase_one(&doc, RephraseScheme::ColloquialToFormal)
        .unwrap();
    handle.join().unwrap();
    assert_eq!(record.rephrased, "Formal text.");
    assert_eq!(record.provider_id, "test-model");

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    let last = &seen[1];
    assert_eq!(last.request_line, "POST /v1beta/models/test-model:generateContent HTTP/1.1");
    assert!(last.headers.iter().any(|h| h.eq_ignore_ascii_case("x-goog-api-key: k-123")));
    let body: serde_json::Value = serde_json::from_str(&last.body).unwrap();
    let prompt = body["contents"][0]["parts"][0]["text"].as_str().unwrap();
    assert!(prompt.ends_with("\ngonna be late lol"));
    assert!(prompt.starts_with("Convert the following tweet"));
    assert_eq!(body["generationConfig"]["temperature"], 0.0);
}

#[test]
fn openai_style_over_http() {
    let reply = r#"{"choices":[{"message":{"role":"assistant","content":"Hello."}}]}"#;
    let (addr, seen, handle) = mock_server(vec![(200, reply.into()), (401, "{\"error\":\"bad key\"}".into())]);
    let config = ProviderConfig {
        style: ApiStyle::OpenAiChat,
        endpoint: format!("{addr}/v1/chat/completions"),
        model: "m".into(),
        ..ProviderConfig::default()
    };
    let provider = HttpProvider::with_key(config, "sk".into()).unwrap();
    let req = CompletionRequest { prompt: "p", document: "d", scheme: RephraseScheme::General };
    assert_eq!(provider.complete(&req).unwrap(), "Hello.");
    match provider.complete(&req) {
        Err(ProviderError::Http { status: 401, body }) => assert!(body.contains("bad key")),
        other => panic!("unexpected {other:?}"),
    }
    handle.join().unwrap();
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].request_line, "POST /v1/chat/completions HTTP/1.1");
    assert!(seen[0].headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk")));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let config = ProviderConfig {
        endpoint: format!("http://{addr}"),
        timeout_secs: 2,
        ..ProviderConfig::default()
    };
    let provider = HttpProvider::with_key(config, "k".into()).unwrap();
    let req = CompletionRequest { prompt: "p", document: "d", scheme: RephraseScheme::General };
    let err = provider.complete(&req).unwrap_err();
    assert!(matches!(err, ProviderError::Transport(_)), "{err:?}");
    assert!(err.is_retryable());
}
