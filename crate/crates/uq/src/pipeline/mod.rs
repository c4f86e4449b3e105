//! Per-prompt scoring pipelines shared by every run mode.

mod blackbox;
mod ensemble;
mod panel;
mod tune;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use uq_core::judge::{JudgeVerdict, ScoringTemplate, DEFAULT_JUDGE_TEMPLATE};
use uq_core::{BlackBoxScorer, Generation, ScoreVector, WhiteBoxScorer};

use crate::backend::{chat_generate, ChatProvider, ChatRequest, EmbeddingProvider, EntailmentProvider};
use crate::{Error, Result};

pub use tune::{Grader, TuneRun};

/// A judge on the panel. The generator can serve as its own judge.
#[derive(Clone)]
pub struct Judge {
    pub name: String,
    pub provider: Arc<dyn ChatProvider>,
    pub template: ScoringTemplate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Candidate count `m`; one original is always generated on top.
    pub num_responses: u32,
    pub original_temperature: f64,
    pub candidate_temperature: f64,
    pub judge_temperature: f64,
    pub use_best: bool,
    pub seed: u64,
    pub max_in_flight: usize,
    pub judge_template: String,
    pub self_judge_template: ScoringTemplate,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            num_responses: 5,
            original_temperature: 1.0,
            candidate_temperature: 1.0,
            judge_temperature: 0.0,
            use_best: false,
            seed: 0,
            max_in_flight: 4,
            judge_template: DEFAULT_JUDGE_TEMPLATE.to_string(),
            self_judge_template: ScoringTemplate::Ternary,
        }
    }
}

/// Outcome for one prompt. `error` is set when the prompt failed or could
/// not be fully scored; `scores` then holds whatever was computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scored {
    pub response: Option<String>,
    pub scores: ScoreVector,
    pub ensemble: Option<f64>,
    pub verdicts: Option<Vec<JudgeVerdict>>,
    pub error: Option<String>,
}

impl Scored {
    fn failed(error: &Error) -> Self {
        Self {
            error: Some(error.to_string()),
            ..Self::default()
        }
    }
}

/// An ensemble component id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    BlackBox(BlackBoxScorer),
    WhiteBox(WhiteBoxScorer),
    /// The generator judging its own response.
    SelfJudge,
    /// One named panel judge.
    Judge(String),
    /// A panel aggregate, one of `judge_min`, `judge_max`, `judge_avg`, `judge_median`.
    Aggregate(&'static str),
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "self_judge" {
            return Ok(Self::SelfJudge);
        }
        if let Some(name) = s.strip_prefix("judge:") {
            return Ok(Self::Judge(name.to_string()));
        }
        if let Some(agg) = uq_core::judge::Aggregates::NAMES.iter().find(|n| **n == s) {
            return Ok(Self::Aggregate(agg));
        }
        if let Ok(b) = s.parse() {
            return Ok(Self::BlackBox(b));
        }
        s.parse().map(Self::WhiteBox).map_err(Error::from)
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BlackBox(b) => write!(f, "{b}"),
            Self::WhiteBox(w) => write!(f, "{w}"),
            Self::SelfJudge => f.write_str("self_judge"),
            Self::Judge(name) => write!(f, "judge:{name}"),
            Self::Aggregate(a) => f.write_str(a),
        }
    }
}

/// The run mode of a scoring pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Blackbox,
    Whitebox,
    Panel,
    Ensemble,
    Tune,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blackbox" => Ok(Self::Blackbox),
            "whitebox" => Ok(Self::Whitebox),
            "panel" => Ok(Self::Panel),
            "ensemble" => Ok(Self::Ensemble),
            "tune" => Ok(Self::Tune),
            other => Err(Error::config(format!("unknown mode {other:?}"))),
        }
    }
}

pub struct Engine {
    pub generator: Arc<dyn ChatProvider>,
    pub embedder: Option<Arc<dyn EmbeddingProvider>>,
    pub entailer: Option<Arc<dyn EntailmentProvider>>,
    pub judges: Vec<Judge>,
    pub settings: Settings,
}

impl Engine {
    pub fn new(generator: Arc<dyn ChatProvider>) -> Self {
        Self {
            generator,
            embedder: None,
            entailer: None,
            judges: Vec::new(),
            settings: Settings::default(),
        }
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn with_entailer(mut self, entailer: Arc<dyn EntailmentProvider>) -> Self {
        self.entailer = Some(entailer);
        self
    }

    pub fn with_judge(
        mut self,
        name: impl Into<String>,
        provider: Arc<dyn ChatProvider>,
        template: ScoringTemplate,
    ) -> Self {
        self.judges.push(Judge {
            name: name.into(),
            provider,
            template,
        });
        self
    }

    pub fn with_settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    fn entailer(&self) -> Result<&dyn EntailmentProvider> {
        self.entailer
            .as_deref()
            .ok_or_else(|| Error::config("an entailment provider is required"))
    }

    fn embedder(&self) -> Result<&dyn EmbeddingProvider> {
        self.embedder
            .as_deref()
            .ok_or_else(|| Error::config("an embedding provider is required"))
    }

    /// The single original response for a prompt.
    fn generate_original(&self, prompt: &str, want_logprobs: bool) -> Result<Generation> {
        let request = ChatRequest::new(prompt)
            .temperature(self.settings.original_temperature)
            .logprobs(want_logprobs)
            .seed(self.settings.seed);
        Ok(chat_generate(self.generator.as_ref(), &request)?.remove(0))
    }

    /// `m` candidates in one request, seeded one past the original.
    fn generate_candidates(&self, prompt: &str, want_logprobs: bool) -> Result<Vec<Generation>> {
        let request = ChatRequest::new(prompt)
            .samples(self.settings.num_responses)
            .temperature(self.settings.candidate_temperature)
            .logprobs(want_logprobs)
            .seed(self.settings.seed.wrapping_add(1));
        chat_generate(self.generator.as_ref(), &request)
    }

    fn check_logprobs(&self) -> Result<()> {
        if self.generator.supports_logprobs() {
            Ok(())
        } else {
            Err(Error::Capability(format!(
                "{} does not return token logprobs",
                self.generator.id()
            )))
        }
    }

    /// White-box scores from one generation per prompt.
    pub fn whitebox(&self, prompts: &[String], scorers: &[WhiteBoxScorer]) -> Result<Vec<Scored>> {
        if scorers.is_empty() {
            return Err(Error::config("no white-box scorers requested"));
        }
        self.check_logprobs()?;
        Ok(crate::pool::map_ordered(
            prompts,
            self.settings.max_in_flight,
            |_, prompt| {
                let run = || -> Result<Scored> {
                    let generation = self.generate_original(prompt, true)?;
                    let scores = whitebox_scores(&generation, scorers)?;
                    Ok(Scored {
                        response: Some(generation.text),
                        scores,
                        ..Scored::default()
                    })
                };
                run().unwrap_or_else(|e| Scored::failed(&e))
            },
        ))
    }
}

fn whitebox_scores(generation: &Generation, scorers: &[WhiteBoxScorer]) -> Result<ScoreVector> {
    let seq = uq_core::whitebox::TokenProbSequence::from_generation(generation)?;
    Ok(scorers
        .iter()
        .map(|s| (s.to_string(), uq_core::whitebox::score(*s, &seq)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CallCounter, CountedChat, MockChat};

    #[test]
    fn component_names_round_trip() {
        for name in [
            "exact_match",
            "semantic_entropy",
            "min_probability",
            "self_judge",
            "judge:gpt",
            "judge_median",
        ] {
            assert_eq!(name.parse::<Component>().unwrap().to_string(), name);
        }
        assert!("bleurt".parse::<Component>().is_err());
    }

    #[test]
    fn whitebox_issues_one_call_per_prompt() {
        let mock = MockChat::from_json(
            r#"{"q": [{"text": "a b", "logprobs": [["a", -0.2231435513142097], ["b", -0.10536051565782628]]}]}"#,
        )
        .unwrap();
        let counter = CallCounter::new();
        let engine = Engine::new(Arc::new(CountedChat::new(mock, counter.clone())));
        let out = engine
            .whitebox(
                &["q".to_string()],
                &[
                    WhiteBoxScorer::MinProbability,
                    WhiteBoxScorer::LengthNormalizedProbability,
                ],
            )
            .unwrap();
        assert!((out[0].scores["min_probability"] - 0.8).abs() < 1e-12);
        assert!((out[0].scores["length_normalized_probability"] - 0.72f64.sqrt()).abs() < 1e-12);
        assert_eq!(counter.snapshot().chat_generations, 1);
    }

    #[test]
    fn whitebox_capability_error_precedes_generation() {
        let mock = MockChat::from_pairs([("q", &["a"][..])]);
        let counter = CallCounter::new();
        let engine = Engine::new(Arc::new(CountedChat::new(mock, counter.clone())));
        let err = engine.whitebox(&["q".to_string()], &[WhiteBoxScorer::MinProbability]);
        assert!(matches!(err, Err(Error::Capability(_))));
        assert_eq!(counter.snapshot().total(), 0);
    }
}
