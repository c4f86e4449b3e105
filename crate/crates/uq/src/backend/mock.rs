//! Deterministic offline providers.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use uq_core::seed::{fnv1a, mix64};
use uq_core::{Generation, TokenLogprob};

use super::{ChatProvider, ChatRequest, EmbeddingProvider, EntailmentProvider};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
struct FixtureEntry {
    text: String,
    #[serde(default)]
    logprobs: Option<Vec<(String, f64)>>,
}

/// Chat provider backed by a fixture table `{prompt: [{text, logprobs}]}`.
///
/// Sample `i` of a request with seed `s` is fixture entry
/// `(s + i) mod len` for that prompt. Prompts without fixtures fall back to
/// `default_reply` when one is set and fail otherwise.
#[derive(Debug, Clone)]
pub struct MockChat {
    fixtures: BTreeMap<String, Vec<FixtureEntry>>,
    logprobs: bool,
    default_reply: Option<String>,
    jitter_ms: u64,
    id: String,
}

impl MockChat {
    pub fn from_json(json: &str) -> Result<Self> {
        let fixtures: BTreeMap<String, Vec<FixtureEntry>> = serde_json::from_str(json)?;
        if let Some((prompt, _)) = fixtures.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::config(format!("fixture list for {prompt:?} is empty")));
        }
        let mut mock = Self {
            fixtures,
            logprobs: true,
            default_reply: None,
            jitter_ms: 0,
            id: String::new(),
        };
        mock.refresh_id();
        Ok(mock)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// Fixtures with one entry per prompt and no logprobs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [&'a str])>) -> Self {
        let fixtures = pairs
            .into_iter()
            .map(|(p, texts)| {
                let entries = texts
                    .iter()
                    .map(|t| FixtureEntry {
                        text: t.to_string(),
                        logprobs: None,
                    })
                    .collect();
                (p.to_string(), entries)
            })
            .collect();
        let mut mock = Self {
            fixtures,
            logprobs: false,
            default_reply: None,
            jitter_ms: 0,
            id: String::new(),
        };
        mock.refresh_id();
        mock
    }

    /// Whether the mock claims logprob support.
    pub fn with_logprobs(mut self, enabled: bool) -> Self {
        self.logprobs = enabled;
        self.refresh_id();
        self
    }

    pub fn with_default_reply(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = Some(reply.into());
        self.refresh_id();
        self
    }

    /// Sleeps a deterministic pseudo-random 0..=`max_ms` per request, to
    /// shuffle completion order under concurrency.
    pub fn with_jitter(mut self, max_ms: u64) -> Self {
        self.jitter_ms = max_ms;
        self
    }

    fn refresh_id(&mut self) {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.fixtures).expect("fixtures serialize"));
        hasher.update([self.logprobs as u8]);
        if let Some(r) = &self.default_reply {
            hasher.update(r.as_bytes());
        }
        self.id = format!("mock-chat:{}", &hex::encode(hasher.finalize())[..16]);
    }
}

impl ChatProvider for MockChat {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn supports_logprobs(&self) -> bool {
        self.logprobs
    }

    fn generate(&self, request: &ChatRequest) -> Result<Vec<Generation>> {
        let seed = request.seed.unwrap_or(0);
        if self.jitter_ms > 0 {
            let h = mix64(fnv1a(request.prompt.as_bytes()) ^ seed);
            std::thread::sleep(Duration::from_millis(h % (self.jitter_ms + 1)));
        }
        let fallback;
        let entries = match (self.fixtures.get(&request.prompt), &self.default_reply) {
            (Some(entries), _) => entries,
            (None, Some(reply)) => {
                fallback = vec![FixtureEntry {
                    text: reply.clone(),
                    logprobs: None,
                }];
                &fallback
            }
            (None, None) => {
                return Err(Error::Transport(format!(
                    "mock has no fixture for prompt {:?}",
                    request.prompt
                )));
            }
        };
        let n = entries.len() as u64;
        Ok((0..request.sample_count as u64)
            .map(|i| {
                let entry = &entries[(seed.wrapping_add(i) % n) as usize];
                Generation {
                    text: entry.text.clone(),
                    token_logprobs: if request.want_logprobs {
                        entry.logprobs.as_ref().map(|lps| {
                            lps.iter()
                                .map(|(token, logprob)| TokenLogprob {
                                    token: token.clone(),
                                    logprob: *logprob,
                                })
                                .collect()
                        })
                    } else {
                        None
                    },
                }
            })
            .collect())
    }
}

/// Lowercased words with surrounding punctuation stripped; falls back to
/// the trimmed text when nothing alphanumeric remains.
fn normalized_tokens(text: &str) -> Vec<String> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    if tokens.is_empty() {
        vec![text.trim().to_string()]
    } else {
        tokens
    }
}

/// Feature-hashing embedder: each normalized token maps to a fixed
/// pseudo-random vector in `[-1, 1)^d` and a text embeds to the sum.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dimension: usize,
}

impl MockEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    fn token_vector(&self, token: &str) -> impl Iterator<Item = f64> {
        let mut state = fnv1a(token.as_bytes());
        (0..self.dimension).map(move |_| {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let bits = mix64(state) >> 11;
            bits as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new(64)
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn id(&self) -> String {
        format!("mock-embed:{}", self.dimension)
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut v = vec![0.0; self.dimension];
                for token in normalized_tokens(text) {
                    for (slot, x) in v.iter_mut().zip(self.token_vector(&token)) {
                        *slot += x;
                    }
                }
                v
            })
            .collect())
    }
}

#[derive(Debug, Deserialize)]
struct EntailFixture {
    premise: String,
    hypothesis: String,
    probs: [f64; 3],
}

/// Entailment from a fixture table, with a lexical default: identical
/// trimmed texts entail with certainty; otherwise, with `j` the Jaccard
/// overlap of normalized tokens, the distribution is `(j, (1-j)/2, (1-j)/2)`.
#[derive(Debug, Clone, Default)]
pub struct MockEntailer {
    fixtures: HashMap<(String, String), [f64; 3]>,
}

impl MockEntailer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fixture triples are returned as-is and validated by the caller, so a
    /// malformed triple surfaces as an error.
    pub fn with_fixture(mut self, premise: &str, hypothesis: &str, probs: [f64; 3]) -> Self {
        self.fixtures
            .insert((premise.to_string(), hypothesis.to_string()), probs);
        self
    }

    /// Reads `[{"premise", "hypothesis", "probs": [e, n, c]}]`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<EntailFixture> = serde_json::from_str(&json)?;
        Ok(entries
            .into_iter()
            .fold(Self::new(), |m, f| m.with_fixture(&f.premise, &f.hypothesis, f.probs)))
    }

    fn default_rule(premise: &str, hypothesis: &str) -> [f64; 3] {
        if premise.trim() == hypothesis.trim() {
            return [1.0, 0.0, 0.0];
        }
        let a: BTreeSet<String> = normalized_tokens(premise).into_iter().collect();
        let b: BTreeSet<String> = normalized_tokens(hypothesis).into_iter().collect();
        let inter = a.intersection(&b).count() as f64;
        let union = a.union(&b).count() as f64;
        let j = inter / union;
        let rest = (1.0 - j) / 2.0;
        [j, rest, rest]
    }
}

impl EntailmentProvider for MockEntailer {
    fn id(&self) -> String {
        let mut keys: Vec<_> = self.fixtures.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        let mut hasher = Sha256::new();
        for ((p, h), probs) in keys {
            hasher.update(p.as_bytes());
            hasher.update([0]);
            hasher.update(h.as_bytes());
            hasher.update([0]);
            for x in probs {
                hasher.update(x.to_le_bytes());
            }
        }
        format!("mock-entail:{}", &hex::encode(hasher.finalize())[..16])
    }

    fn entail_raw(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3]> {
        Ok(self
            .fixtures
            .get(&(premise.to_string(), hypothesis.to_string()))
            .copied()
            .unwrap_or_else(|| Self::default_rule(premise, hypothesis)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{chat_generate, embed, entail};

    const FIXTURES: &str = r#"{
        "capital of France?": [
            {"text": "Paris", "logprobs": [["Paris", -0.1]]},
            {"text": "Paris.", "logprobs": [["Paris", -0.2], [".", -0.01]]},
            {"text": "Lyon", "logprobs": null}
        ]
    }"#;

    #[test]
    fn seeded_sampling_is_deterministic() {
        let mock = MockChat::from_json(FIXTURES).unwrap();
        let req = ChatRequest::new("capital of France?").samples(3).seed(7);
        let a = chat_generate(&mock, &req).unwrap();
        let b = chat_generate(&mock, &req).unwrap();
        assert_eq!(a, b);
        // entries (7 + i) mod 3 = 1, 2, 0
        let texts: Vec<_> = a.iter().map(|g| g.text.as_str()).collect();
        assert_eq!(texts, ["Paris.", "Lyon", "Paris"]);
        assert_eq!(
            chat_generate(&mock, &ChatRequest::new("capital of France?"))
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn capability_and_missing_fixture() {
        let mock = MockChat::from_json(FIXTURES).unwrap().with_logprobs(false);
        let req = ChatRequest::new("capital of France?").logprobs(true);
        assert!(matches!(chat_generate(&mock, &req), Err(Error::Capability(_))));
        assert!(matches!(
            chat_generate(&mock, &ChatRequest::new("unknown")),
            Err(Error::Transport(_))
        ));
        let with_default = mock.with_default_reply("1");
        assert_eq!(
            chat_generate(&with_default, &ChatRequest::new("unknown")).unwrap()[0].text,
            "1"
        );
    }

    #[test]
    fn logprobs_only_when_requested() {
        let mock = MockChat::from_json(FIXTURES).unwrap();
        let g = chat_generate(&mock, &ChatRequest::new("capital of France?").seed(1).logprobs(true)).unwrap();
        assert_eq!(g[0].token_logprobs.as_ref().unwrap().len(), 2);
        let g = chat_generate(&mock, &ChatRequest::new("capital of France?").seed(1)).unwrap();
        assert!(g[0].token_logprobs.is_none());
        // entry 2 has no logprobs
        let r = chat_generate(&mock, &ChatRequest::new("capital of France?").seed(2).logprobs(true));
        assert!(r.is_err());
    }

    #[test]
    fn embeddings_are_deterministic() {
        let e = MockEmbedder::default();
        let a = embed(&e, &["a".to_string()]).unwrap();
        let b = embed(&e, &["a".to_string()]).unwrap();
        assert_eq!(a, b);
        let two = embed(&e, &["a".to_string(), "b c".to_string()]).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].dimension(), two[1].dimension());
        assert!(embed(&e, &[]).is_err());
        assert!(embed(&e, &["  ".to_string()]).is_err());
    }

    #[test]
    fn entailment_fixtures_and_defaults() {
        let m = MockEntailer::new()
            .with_fixture("A", "B", [0.9, 0.05, 0.05])
            .with_fixture("bad", "triple", [0.5, 0.3, 0.3]);
        let j = entail(&m, "A", "B").unwrap();
        assert_eq!((j.p_entail(), j.p_neutral(), j.p_contradict()), (0.9, 0.05, 0.05));
        assert_eq!(entail(&m, "same text", "same text").unwrap().p_entail(), 1.0);
        assert!(matches!(
            entail(&m, "bad", "triple"),
            Err(Error::Core(uq_core::Error::InvalidProbabilities { .. }))
        ));
        let j = entail(&m, "the sky is blue", "the grass is green").unwrap();
        assert!(j.p_entail() < 0.5);
    }
}
