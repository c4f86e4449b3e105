//! Provider interfaces for chat generation, embeddings and entailment.
//!
//! Providers return raw payloads; the free functions [`chat_generate`],
//! [`embed`] and [`entail`] enforce the request preconditions and result
//! contracts, so caches and call counters can sit between the two.

mod counting;
mod mock;
mod openai;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uq_core::{EmbeddingVector, EntailmentJudgment, Generation};

use crate::{Error, Result};

pub use counting::{CallCounter, CallCounts, CountedChat, CountedEmbedder, CountedEntailer};
pub use mock::{MockChat, MockEmbedder, MockEntailer};
pub use openai::{
    ChatEntailer, HttpRequest, HttpResponse, HttpTransport, NliClient, OpenAiChat, OpenAiEmbedder, RetryPolicy,
    UreqTransport, API_BASE_ENV, API_KEY_ENV,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub prompt: String,
    pub sample_count: u32,
    pub temperature: f64,
    pub want_logprobs: bool,
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            sample_count: 1,
            temperature: 1.0,
            want_logprobs: false,
            seed: None,
        }
    }

    pub fn samples(mut self, n: u32) -> Self {
        self.sample_count = n;
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn logprobs(mut self, want: bool) -> Self {
        self.want_logprobs = want;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(uq_core::Error::Precondition("sample_count must be at least 1".into()).into());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(uq_core::Error::Precondition(format!("temperature {} is invalid", self.temperature)).into());
        }
        Ok(())
    }
}

pub trait ChatProvider: Send + Sync {
    /// Stable identity used in cache keys.
    fn id(&self) -> String;

    fn supports_logprobs(&self) -> bool;

    fn generate(&self, request: &ChatRequest) -> Result<Vec<Generation>>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> String;

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Returns `[p_entail, p_neutral, p_contradict]` for premise → hypothesis.
pub trait EntailmentProvider: Send + Sync {
    fn id(&self) -> String;

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]>;
}

/// Generates `request.sample_count` responses, enforcing the cardinality
/// and logprob contracts. Positive logprobs are clamped to 0 with a warning.
pub fn chat_generate(provider: &dyn ChatProvider, request: &ChatRequest) -> Result<Vec<Generation>> {
    request.validate()?;
    if request.want_logprobs && !provider.supports_logprobs() {
        return Err(Error::Capability(format!(
            "{} does not return token logprobs",
            provider.id()
        )));
    }
    let mut generations = provider.generate(request)?;
    if generations.is_empty() {
        return Err(Error::EmptyResponse);
    }
    if generations.len() != request.sample_count as usize {
        return Err(Error::GenerationCount {
            expected: request.sample_count as usize,
            got: generations.len(),
        });
    }
    for g in &mut generations {
        if request.want_logprobs {
            if g.token_logprobs.is_none() {
                return Err(uq_core::Error::MissingLogprobs.into());
            }
            let clamped = g.clamp_positive_logprobs();
            if clamped > 0 {
                log::warn!("clamped {clamped} positive logprob(s) to 0 from {}", provider.id());
            }
        }
        g.validate()?;
    }
    Ok(generations)
}

/// One vector per input text, all of the same dimension.
pub fn embed(provider: &dyn EmbeddingProvider, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(uq_core::Error::Precondition("embed needs at least one text".into()).into());
    }
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(uq_core::Error::Precondition("cannot embed empty text".into()).into());
    }
    let raw = provider.embed_raw(texts)?;
    if raw.len() != texts.len() {
        return Err(uq_core::Error::LengthMismatch {
            left: texts.len(),
            right: raw.len(),
        }
        .into());
    }
    let dim = raw[0].len();
    if let Some(v) = raw.iter().find(|v| v.len() != dim) {
        return Err(uq_core::Error::DimensionMismatch {
            left: dim,
            right: v.len(),
        }
        .into());
    }
    raw.into_iter()
        .map(|v| EmbeddingVector::new(v).map_err(Error::from))
        .collect()
}

/// A validated entailment judgment; malformed distributions are errors.
pub fn entail(provider: &dyn EntailmentProvider, premise: &str, hypothesis: &str) -> Result<EntailmentJudgment> {
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(uq_core::Error::Precondition("entailment needs non-empty texts".into()).into());
    }
    let [e, n, c] = provider.entail_raw(premise, hypothesis)?;
    Ok(EntailmentJudgment::new(e, n, c)?)
}

impl<T: ChatProvider + ?Sized> ChatProvider for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn supports_logprobs(&self) -> bool {
        (**self).supports_logprobs()
    }

    fn generate(&self, request: &ChatRequest) -> Result<Vec<Generation>> {
        (**self).generate(request)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).embed_raw(texts)
    }
}

impl<T: EntailmentProvider + ?Sized> EntailmentProvider for Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]> {
        (**self).entail_raw(premise, hypothesis)
    }
}
