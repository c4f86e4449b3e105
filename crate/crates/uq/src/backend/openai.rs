//! HTTP providers speaking the OpenAI-compatible chat and embeddings
//! protocol, plus a small JSON NLI endpoint.

use std::time::Duration;

use serde_json::{json, Value};
use uq_core::{Generation, TokenLogprob};

use super::{ChatProvider, ChatRequest, EmbeddingProvider, EntailmentProvider};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Posts a JSON body. `Err` means the request never produced a status.
pub trait HttpTransport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> std::result::Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(120))
    }
}

impl HttpTransport for UreqTransport {
    fn post(&self, request: &HttpRequest) -> std::result::Result<HttpResponse, String> {
        let mut builder = self.agent.post(&request.url);
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        let mut response = builder.send(request.body.as_bytes()).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Retries transport failures and 5xx responses with exponential backoff.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            attempts: 1,
            base_delay: Duration::ZERO,
        }
    }

    fn post_json(&self, transport: &dyn HttpTransport, request: &HttpRequest) -> Result<Value> {
        let mut last = String::new();
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(self.base_delay * 2u32.pow(attempt - 1));
            }
            match transport.post(request) {
                Ok(r) if (200..300).contains(&r.status) => {
                    return serde_json::from_str(&r.body)
                        .map_err(|e| Error::Transport(format!("{}: malformed JSON: {e}", request.url)));
                }
                Ok(r) if r.status >= 500 => last = format!("{}: HTTP {}: {}", request.url, r.status, r.body),
                Ok(r) => {
                    return Err(Error::Transport(format!(
                        "{}: HTTP {}: {}",
                        request.url, r.status, r.body
                    )))
                }
                Err(e) => last = format!("{}: {e}", request.url),
            }
            log::debug!("attempt {} failed: {last}", attempt + 1);
        }
        Err(Error::Transport(last))
    }
}

fn bad_shape(what: &str) -> Error {
    Error::Transport(format!("unexpected response shape: {what}"))
}

fn auth_headers(api_key: &Option<String>) -> Vec<(String, String)> {
    let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
    if let Some(key) = api_key {
        headers.push(("Authorization".to_string(), format!("Bearer {key}")));
    }
    headers
}

pub const API_KEY_ENV: &str = "UQ_API_KEY";
pub const API_BASE_ENV: &str = "UQ_API_BASE";
const DEFAULT_BASE: &str = "https://api.openai.com/v1";

fn base_from_env(base: Option<String>) -> String {
    base.or_else(|| std::env::var(API_BASE_ENV).ok())
        .unwrap_or_else(|| DEFAULT_BASE.to_string())
        .trim_end_matches('/')
        .to_string()
}

/// Chat completions over `POST {base}/chat/completions`.
pub struct OpenAiChat {
    transport: Box<dyn HttpTransport>,
    base_url: String,
    model: String,
    api_key: Option<String>,
    logprobs: bool,
    retry: RetryPolicy,
}

impl OpenAiChat {
    /// `base_url` falls back to `UQ_API_BASE`; the key comes from `UQ_API_KEY`.
    pub fn new(model: impl Into<String>, base_url: Option<String>) -> Self {
        Self::with_transport(Box::new(UreqTransport::default()), model, base_url)
            .api_key(std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_transport(
        transport: Box<dyn HttpTransport>,
        model: impl Into<String>,
        base_url: Option<String>,
    ) -> Self {
        Self {
            transport,
            base_url: base_from_env(base_url),
            model: model.into(),
            api_key: None,
            logprobs: true,
            retry: RetryPolicy::default(),
        }
    }

    pub fn api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn supports_logprobs(mut self, yes: bool) -> Self {
        self.logprobs = yes;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn parse_choices(body: &Value, want_logprobs: bool) -> Result<Vec<Generation>> {
        let choices = body["choices"].as_array().ok_or_else(|| bad_shape("missing choices"))?;
        let mut indexed: Vec<(u64, Generation)> = Vec::with_capacity(choices.len());
        for (pos, choice) in choices.iter().enumerate() {
            let text = choice["message"]["content"]
                .as_str()
                .ok_or_else(|| bad_shape("missing message content"))?
                .to_string();
            let token_logprobs = match choice["logprobs"]["content"].as_array() {
                Some(tokens) if want_logprobs => Some(
                    tokens
                        .iter()
                        .map(|t| {
                            Ok(TokenLogprob {
                                token: t["token"].as_str().unwrap_or_default().to_string(),
                                logprob: t["logprob"].as_f64().ok_or_else(|| bad_shape("logprob"))?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                _ => None,
            };
            let index = choice["index"].as_u64().unwrap_or(pos as u64);
            indexed.push((index, Generation { text, token_logprobs }));
        }
        indexed.sort_by_key(|(i, _)| *i);
        Ok(indexed.into_iter().map(|(_, g)| g).collect())
    }
}

impl ChatProvider for OpenAiChat {
    fn id(&self) -> String {
        format!("openai:{}@{}", self.model, self.base_url)
    }

    fn supports_logprobs(&self) -> bool {
        self.logprobs
    }

    fn generate(&self, request: &ChatRequest) -> Result<Vec<Generation>> {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "n": request.sample_count,
            "temperature": request.temperature,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        if request.want_logprobs {
            body["logprobs"] = json!(true);
        }
        let http = HttpRequest {
            url: format!("{}/chat/completions", self.base_url),
            headers: auth_headers(&self.api_key),
            body: body.to_string(),
        };
        let value = self.retry.post_json(self.transport.as_ref(), &http)?;
        Self::parse_choices(&value, request.want_logprobs)
    }
}

/// Embeddings over `POST {base}/embeddings`.
pub struct OpenAiEmbedder {
    transport: Box<dyn HttpTransport>,
    base_url: String,
    model: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl OpenAiEmbedder {
    pub fn new(model: impl Into<String>, base_url: Option<String>) -> Self {
        Self::with_transport(Box::new(UreqTransport::default()), model, base_url)
            .api_key(std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_transport(
        transport: Box<dyn HttpTransport>,
        model: impl Into<String>,
        base_url: Option<String>,
    ) -> Self {
        Self {
            transport,
            base_url: base_from_env(base_url),
            model: model.into(),
            api_key: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl EmbeddingProvider for OpenAiEmbedder {
    fn id(&self) -> String {
        format!("openai-embed:{}@{}", self.model, self.base_url)
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let http = HttpRequest {
            url: format!("{}/embeddings", self.base_url),
            headers: auth_headers(&self.api_key),
            body: json!({"model": self.model, "input": texts}).to_string(),
        };
        let value = self.retry.post_json(self.transport.as_ref(), &http)?;
        let data = value["data"].as_array().ok_or_else(|| bad_shape("missing data"))?;
        let mut rows: Vec<(u64, Vec<f64>)> = data
            .iter()
            .enumerate()
            .map(|(pos, item)| {
                let v = item["embedding"]
                    .as_array()
                    .ok_or_else(|| bad_shape("missing embedding"))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| bad_shape("non-numeric embedding")))
                    .collect::<Result<Vec<f64>>>()?;
                Ok((item["index"].as_u64().unwrap_or(pos as u64), v))
            })
            .collect::<Result<_>>()?;
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

/// Entailment from a JSON service: `POST url {premise, hypothesis}` answering
/// `{entailment, neutral, contradiction}`.
pub struct NliClient {
    transport: Box<dyn HttpTransport>,
    url: String,
    retry: RetryPolicy,
}

impl NliClient {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_transport(Box::new(UreqTransport::default()), url)
    }

    pub fn with_transport(transport: Box<dyn HttpTransport>, url: impl Into<String>) -> Self {
        Self {
            transport,
            url: url.into(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl EntailmentProvider for NliClient {
    fn id(&self) -> String {
        format!("nli:{}", self.url)
    }

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]> {
        let http = HttpRequest {
            url: self.url.clone(),
            headers: auth_headers(&None),
            body: json!({"premise": premise, "hypothesis": hypothesis}).to_string(),
        };
        let v = self.retry.post_json(self.transport.as_ref(), &http)?;
        let get = |k: &str| v[k].as_f64().ok_or_else(|| bad_shape(k));
        Ok([get("entailment")?, get("neutral")?, get("contradiction")?])
    }
}

const ENTAIL_PROMPT: &str = "Premise: {premise}\nHypothesis: {hypothesis}\n\n\
Estimate how likely it is that the premise entails, is neutral towards, or contradicts the hypothesis. \
Reply with only a JSON object of the form {\"entailment\": p, \"neutral\": p, \"contradiction\": p} \
where the probabilities sum to 1.";

/// Entailment by asking a chat model for a JSON distribution. Replies are
/// renormalized; a reply that is not a non-negative triple with positive
/// mass is an error.
pub struct ChatEntailer<P> {
    chat: P,
}

impl<P: ChatProvider> ChatEntailer<P> {
    pub fn new(chat: P) -> Self {
        Self { chat }
    }

    fn parse(reply: &str) -> Result<[f64; 3]> {
        let start = reply.find('{');
        let end = reply.rfind('}');
        let object = match (start, end) {
            (Some(s), Some(e)) if s < e => &reply[s..=e],
            _ => return Err(bad_shape("entailment reply has no JSON object")),
        };
        let v: Value = serde_json::from_str(object).map_err(|_| bad_shape("entailment reply is not JSON"))?;
        let get = |k: &str| {
            v[k].as_f64()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| bad_shape(k))
        };
        let raw = [get("entailment")?, get("neutral")?, get("contradiction")?];
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(bad_shape("entailment probabilities are all zero"));
        }
        Ok(raw.map(|x| x / total))
    }
}

impl<P: ChatProvider> EntailmentProvider for ChatEntailer<P> {
    fn id(&self) -> String {
        format!("chat-entail:{}", self.chat.id())
    }

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]> {
        let prompt = ENTAIL_PROMPT
            .replace("{premise}", premise)
            .replace("{hypothesis}", hypothesis);
        let request = ChatRequest::new(prompt).temperature(0.0).seed(0);
        let reply = super::chat_generate(&self.chat, &request)?;
        Self::parse(&reply[0].text)
    }
}
