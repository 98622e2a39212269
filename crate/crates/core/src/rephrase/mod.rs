//! LLM rewriting of raw documents under a fixed prompt scheme.
//!
//! Every successful response is written to an append-only cache keyed by
//! `(doc id, scheme, provider id, sha256(original text))`. A cache hit never
//! reaches the provider, so replaying a warm cache is offline and
//! deterministic. Failed documents are reported, never fatal.

mod cache;
mod prompt;
mod provider;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;

pub use cache::{CacheKey, RephraseCache};
pub use prompt::{clean_response, render_prompt, RephraseScheme};
pub use provider::{
    request_body, response_text, ApiStyle, CacheOnlyProvider, CompletionRequest, HttpProvider,
    IdentityProvider, Provider, ProviderConfig, ProviderError,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RephraseRecord {
    pub doc_id: String,
    pub scheme: RephraseScheme,
    pub provider_id: String,
    pub original: String,
    pub rephrased: String,
    pub from_cache: bool,
    /// RFC 3339 time of the provider call that produced `rephrased`.
    pub requested_at: String,
}

/// Retry and pacing limits for provider calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_retries: u32,
    /// Base delay, doubled after every failed attempt.
    pub backoff: Duration,
    /// 0 disables the cap.
    pub requests_per_minute: u32,
    pub max_in_flight: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_retries: 3,
            backoff: Duration::from_millis(1000),
            requests_per_minute: 0,
            max_in_flight: 4,
        }
    }
}

impl From<&ProviderConfig> for Limits {
    fn from(c: &ProviderConfig) -> Self {
        Limits {
            max_retries: c.max_retries,
            backoff: Duration::from_millis(c.retry_backoff_ms),
            requests_per_minute: c.requests_per_minute,
            max_in_flight: c.max_in_flight.max(1),
        }
    }
}

/// Spaces request start times at least `60s / rpm` apart across all threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: u32) -> Self {
        RateLimiter {
            interval: (requests_per_minute > 0)
                .then(|| Duration::from_secs_f64(60.0 / requests_per_minute as f64)),
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let Some(interval) = self.interval else {
            return;
        };
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RephraseEntry {
    Ok(RephraseRecord),
    Failed { doc_id: String, error: String },
}

impl RephraseEntry {
    pub fn doc_id(&self) -> &str {
        match self {
            RephraseEntry::Ok(r) => &r.doc_id,
            RephraseEntry::Failed { doc_id, .. } => doc_id,
        }
    }
}

/// Outcome of rewriting a whole corpus: one entry per input document, in
/// input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRephrase {
    pub scheme: RephraseScheme,
    pub entries: Vec<RephraseEntry>,
    pub failed_ids: Vec<String>,
}

impl CorpusRephrase {
    /// Documents carrying the rewritten text. Failed documents are dropped,
    /// or keep their original text when `fallback_to_original` is set.
    pub fn documents(&self, originals: &[RawDocument], fallback_to_original: bool) -> Vec<RawDocument> {
        originals
            .iter()
            .zip(&self.entries)
            .filter_map(|(doc, entry)| match entry {
                RephraseEntry::Ok(r) => Some(RawDocument {
                    text: r.rephrased.clone(),
                    ..doc.clone()
                }),
                RephraseEntry::Failed { .. } if fallback_to_original => Some(doc.clone()),
                RephraseEntry::Failed { .. } => None,
            })
            .collect()
    }

    pub fn cache_hits(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e, RephraseEntry::Ok(r) if r.from_cache))
            .count()
    }
}

/// Drives one provider through the cache with retry and pacing.
pub struct Rephraser<'a> {
    provider: &'a dyn Provider,
    cache: &'a RephraseCache,
    limits: Limits,
    limiter: RateLimiter,
}

impl<'a> Rephraser<'a> {
    pub fn new(provider: &'a dyn Provider, cache: &'a RephraseCache, limits: Limits) -> Self {
        Rephraser {
            provider,
            cache,
            limiter: RateLimiter::new(limits.requests_per_minute),
            limits,
        }
    }

    /// Rewrites one document, serving it from the cache when possible.
    pub fn rephrase_one(&self, doc: &RawDocument, scheme: RephraseScheme) -> crate::Result<RephraseRecord> {
        let key = CacheKey::new(&doc.id, scheme, self.provider.id(), &doc.text);
        if let Some(hit) = self.cache.get(&key) {
            debug!("cache hit for {}", doc.id);
            return Ok(hit);
        }
        let prompt = render_prompt(scheme, &doc.text)?;
        let request = CompletionRequest {
            prompt: &prompt,
            document: &doc.text,
            scheme,
        };
        let mut attempt = 0;
        let text = loop {
            self.limiter.acquire();
            match self.provider.complete(&request) {
                Ok(raw) => {
                    let cleaned = clean_response(&raw);
                    if cleaned.is_empty() {
                        return Err(ProviderError::Empty.into());
                    }
                    break cleaned.to_owned();
                }
                Err(e) if e.is_retryable() && attempt < self.limits.max_retries => {
                    let delay = self.limits.backoff.saturating_mul(1 << attempt.min(16));
                    warn!("{}: {e}; retrying in {delay:?}", doc.id);
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e.into()),
            }
        };
        let record = RephraseRecord {
            doc_id: doc.id.clone(),
            scheme,
            provider_id: self.provider.id().to_owned(),
            original: doc.text.clone(),
            rephrased: text,
            from_cache: false,
            requested_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        self.cache.insert(&record)?;
        Ok(record)
    }

    /// Rewrites every document with at most `max_in_flight` provider calls
    /// outstanding. Failures are collected, never fatal.
    pub fn rephrase_corpus(&self, docs: &[RawDocument], scheme: RephraseScheme) -> CorpusRephrase {
        let slots: Vec<Mutex<Option<RephraseEntry>>> = docs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.limits.max_in_flight.clamp(1, docs.len().max(1));
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(doc) = docs.get(i) else {
                        break;
                    };
                    let entry = match self.rephrase_one(doc, scheme) {
                        Ok(r) => RephraseEntry::Ok(r),
                        Err(e) => {
                            warn!("rephrasing {} failed: {e}", doc.id);
                            RephraseEntry::Failed {
                                doc_id: doc.id.clone(),
                                error: e.to_string(),
                            }
                        }
                    };
                    *slots[i].lock().unwrap() = Some(entry);
                });
            }
        });
        let entries: Vec<RephraseEntry> = slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot filled"))
            .collect();
        let failed_ids = entries
            .iter()
            .filter(|e| matches!(e, RephraseEntry::Failed { .. }))
            .map(|e| e.doc_id().to_owned())
            .collect();
        CorpusRephrase {
            scheme,
            entries,
            failed_ids,
        }
    }
}
