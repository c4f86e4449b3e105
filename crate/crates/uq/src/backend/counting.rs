use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uq_core::Generation;

use super::{ChatProvider, ChatRequest, EmbeddingProvider, EntailmentProvider};
use crate::Result;

/// Counts calls that reach a provider. Wrap providers underneath any cache
/// so that replayed results are not counted.
#[derive(Debug, Default)]
pub struct CallCounter {
    chat_requests: AtomicU64,
    chat_generations: AtomicU64,
    embed_requests: AtomicU64,
    entail_requests: AtomicU64,
}

/// A snapshot of [`CallCounter`]. `chat_generations` counts sampled
/// completions; one request for `n` samples adds `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub chat_requests: u64,
    pub chat_generations: u64,
    pub embed_requests: u64,
    pub entail_requests: u64,
}

impl CallCounts {
    pub fn total(&self) -> u64 {
        self.chat_requests + self.embed_requests + self.entail_requests
    }
}

impl CallCounter {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn snapshot(&self) -> CallCounts {
        CallCounts {
            chat_requests: self.chat_requests.load(Ordering::SeqCst),
            chat_generations: self.chat_generations.load(Ordering::SeqCst),
            embed_requests: self.embed_requests.load(Ordering::SeqCst),
            entail_requests: self.entail_requests.load(Ordering::SeqCst),
        }
    }
}

pub struct CountedChat<P> {
    inner: P,
    counter: Arc<CallCounter>,
}

impl<P> CountedChat<P> {
    pub fn new(inner: P, counter: Arc<CallCounter>) -> Self {
        Self { inner, counter }
    }
}

impl<P: ChatProvider> ChatProvider for CountedChat<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn supports_logprobs(&self) -> bool {
        self.inner.supports_logprobs()
    }

    fn generate(&self, request: &ChatRequest) -> Result<Vec<Generation>> {
        self.counter.chat_requests.fetch_add(1, Ordering::SeqCst);
        self.counter
            .chat_generations
            .fetch_add(request.sample_count as u64, Ordering::SeqCst);
        self.inner.generate(request)
    }
}

pub struct CountedEmbedder<P> {
    inner: P,
    counter: Arc<CallCounter>,
}

impl<P> CountedEmbedder<P> {
    pub fn new(inner: P, counter: Arc<CallCounter>) -> Self {
        Self { inner, counter }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CountedEmbedder<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        self.counter.embed_requests.fetch_add(1, Ordering::SeqCst);
        self.inner.embed_raw(texts)
    }
}

pub struct CountedEntailer<P> {
    inner: P,
    counter: Arc<CallCounter>,
}

impl<P> CountedEntailer<P> {
    pub fn new(inner: P, counter: Arc<CallCounter>) -> Self {
        Self { inner, counter }
    }
}

impl<P: EntailmentProvider> EntailmentProvider for CountedEntailer<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]> {
        self.counter.entail_requests.fetch_add(1, Ordering::SeqCst);
        self.inner.entail_raw(premise, hypothesis)
    }
}
