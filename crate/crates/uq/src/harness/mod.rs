//! Batch runs: configuration, dataset ingestion, orchestration, and
//! persistence of results, summaries and weights.

mod config;
mod dataset;
mod report;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use uq_core::ensemble::{default_ensemble, EnsembleWeights, Objective, OFF_THE_SHELF};
use uq_core::{BlackBoxScorer, WhiteBoxScorer};

use crate::backend::{
    CallCounter, CallCounts, ChatEntailer, ChatProvider, CountedChat, CountedEmbedder, CountedEntailer,
    EmbeddingProvider, EntailmentProvider, MockChat, MockEmbedder, MockEntailer, NliClient, OpenAiChat, OpenAiEmbedder,
    UreqTransport,
};
use crate::cache::{Cache, CachedChat, CachedEmbedder, CachedEntailer};
use crate::pipeline::{Component, Engine, Grader, Mode, Scored, Settings};
use crate::{Error, Result};

pub use config::{
    BackendConfig, CacheConfig, EmbeddingConfig, EnsembleConfig, EntailmentConfig, GraderKind, JudgeConfig,
    OutputConfig, Overrides, RunConfig, TuneConfig,
};
pub use dataset::{load_dataset, parse_dataset, require_ideals, PromptRecord};
pub use report::{emit_report, load_results, to_csv, to_jsonl, ReportFormat, ResultRecord, WeightsFile};

const DEFAULT_BLACKBOX: [&str; 2] = ["exact_match", "noncontradiction"];
const DEFAULT_WHITEBOX: [&str; 2] = ["min_probability", "length_normalized_probability"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl ScoreStats {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            count: values.len(),
            mean: mean.clamp(min, max),
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSummary {
    pub objective: Objective,
    pub value: f64,
    pub threshold: Option<f64>,
    /// Records that entered the fit.
    pub tuned_on: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub records: usize,
    pub error_count: usize,
    pub scorers: BTreeMap<String, ScoreStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<ScoreStats>,
    /// Calls that reached a provider; cache hits are not counted.
    pub provider_calls: CallCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSummary>,
}

pub struct RunOutput {
    pub results: Vec<ResultRecord>,
    pub summary: Summary,
    /// Set in tune mode.
    pub weights: Option<WeightsFile>,
}

/// Providers and engine assembled from a config. Every provider sits
/// behind the call counter, and the counter behind the cache.
pub struct Runtime {
    pub engine: Engine,
    pub counter: Arc<CallCounter>,
    pub cache: Arc<Cache>,
}

impl Runtime {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let cache = match &config.cache {
            Some(CacheConfig { mode, path: Some(p) }) => Cache::open(*mode, p)?,
            _ => Cache::live(),
        };
        let counter = CallCounter::new();
        let rt = Wiring {
            cache: cache.clone(),
            counter: counter.clone(),
        };
        let generator = rt.chat(&config.backend)?;
        let is_mock = matches!(config.backend, BackendConfig::Mock { .. });

        let embedder = match &config.embedding {
            Some(e) => Some(rt.embedder(e)),
            None if is_mock => Some(rt.embedder(&EmbeddingConfig::Mock { dimension: 64 })),
            None => None,
        };
        let entailer = match &config.entailment {
            Some(e) => Some(rt.entailer(e)?),
            None if is_mock => Some(rt.entailer(&EntailmentConfig::Mock { fixtures: None })?),
            None => None,
        };

        let judge_template = match &config.judge_template {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                if !(text.contains("{question}") && text.contains("{response}")) {
                    return Err(Error::config(format!(
                        "{}: judge template needs {{question}} and {{response}}",
                        p.display()
                    )));
                }
                text
            }
            None => uq_core::judge::DEFAULT_JUDGE_TEMPLATE.to_string(),
        };

        let mut engine = Engine::new(generator.clone()).with_settings(Settings {
            num_responses: config.num_responses,
            original_temperature: config.original_temperature,
            candidate_temperature: config.candidate_temperature,
            judge_temperature: config.judge_temperature,
            use_best: config.use_best,
            seed: config.seed.unwrap_or(0),
            max_in_flight: config.max_in_flight,
            judge_template,
            self_judge_template: config.self_judge_template,
        });
        engine.embedder = embedder;
        engine.entailer = entailer;
        for j in &config.judges {
            let provider = match &j.backend {
                Some(b) => rt.chat(b)?,
                None => generator.clone(),
            };
            engine = engine.with_judge(j.name.clone(), provider, j.template);
        }
        Ok(Self { engine, counter, cache })
    }

    fn grader(&self, config: &RunConfig) -> Result<Grader> {
        Ok(match config.tune.grader {
            GraderKind::ExactMatch => Grader::ExactMatch,
            GraderKind::Judge => {
                let provider = match &config.tune.grader_backend {
                    Some(b) => Wiring {
                        cache: self.cache.clone(),
                        counter: self.counter.clone(),
                    }
                    .chat(b)?,
                    None => self.engine.generator.clone(),
                };
                Grader::Judge(provider)
            }
        })
    }
}

struct Wiring {
    cache: Arc<Cache>,
    counter: Arc<CallCounter>,
}

impl Wiring {
    fn chat(&self, config: &BackendConfig) -> Result<Arc<dyn ChatProvider>> {
        let raw: Arc<dyn ChatProvider> = match config {
            BackendConfig::Mock {
                fixtures,
                logprobs,
                default_reply,
                jitter_ms,
            } => {
                let mut mock = match fixtures {
                    Some(p) => MockChat::from_path(p)?,
                    None => MockChat::from_pairs([]),
                }
                .with_logprobs(*logprobs)
                .with_jitter(*jitter_ms);
                if let Some(r) = default_reply {
                    mock = mock.with_default_reply(r.clone());
                }
                Arc::new(mock)
            }
            BackendConfig::Openai {
                model,
                base_url,
                logprobs,
                timeout_secs,
            } => Arc::new(
                OpenAiChat::with_transport(
                    Box::new(UreqTransport::new(Duration::from_secs(*timeout_secs))),
                    model.clone(),
                    base_url.clone(),
                )
                .api_key(std::env::var(crate::backend::API_KEY_ENV).ok())
                .supports_logprobs(*logprobs),
            ),
        };
        Ok(Arc::new(CachedChat::new(
            CountedChat::new(raw, self.counter.clone()),
            self.cache.clone(),
        )))
    }

    fn embedder(&self, config: &EmbeddingConfig) -> Arc<dyn EmbeddingProvider> {
        let raw: Arc<dyn EmbeddingProvider> = match config {
            EmbeddingConfig::Mock { dimension } => Arc::new(MockEmbedder::new(*dimension)),
            EmbeddingConfig::Openai { model, base_url } => {
                Arc::new(OpenAiEmbedder::new(model.clone(), base_url.clone()))
            }
        };
        Arc::new(CachedEmbedder::new(
            CountedEmbedder::new(raw, self.counter.clone()),
            self.cache.clone(),
        ))
    }

    fn entailer(&self, config: &EntailmentConfig) -> Result<Arc<dyn EntailmentProvider>> {
        let raw: Arc<dyn EntailmentProvider> = match config {
            EntailmentConfig::Mock { fixtures: Some(p) } => Arc::new(MockEntailer::from_path(p)?),
            EntailmentConfig::Mock { fixtures: None } => Arc::new(MockEntailer::new()),
            EntailmentConfig::Nli { url } => Arc::new(NliClient::new(url.clone())),
            // the adapter's chat calls go through the cache and counter already
            EntailmentConfig::Chat { backend } => {
                return Ok(Arc::new(ChatEntailer::new(self.chat(backend)?)));
            }
        };
        Ok(Arc::new(CachedEntailer::new(
            CountedEntailer::new(raw, self.counter.clone()),
            self.cache.clone(),
        )))
    }
}

fn scorer_names(config: &RunConfig, defaults: &[&str]) -> Vec<String> {
    config
        .scorers
        .clone()
        .unwrap_or_else(|| defaults.iter().map(|s| s.to_string()).collect())
}

/// The ensemble weights for an ensemble run: a weights file, else uniform
/// weights over the configured components, else the off-the-shelf default.
pub fn ensemble_weights(config: &RunConfig) -> Result<EnsembleWeights> {
    if let Some(path) = &config.ensemble.weights {
        return WeightsFile::load(path)?.ensemble_weights();
    }
    match &config.ensemble.components {
        Some(ids) => Ok(EnsembleWeights::uniform(ids)?),
        None => Ok(default_ensemble()),
    }
}

fn tune_components(config: &RunConfig) -> Result<Vec<Component>> {
    match &config.ensemble.components {
        Some(ids) => ids.iter().map(|s| s.parse()).collect(),
        None => OFF_THE_SHELF.iter().map(|s| s.parse()).collect(),
    }
}

/// Runs `config.mode` over the dataset. Configuration and capability
/// problems abort before any generation; per-prompt failures are recorded
/// in their result records.
pub fn run(config: &RunConfig, dataset: &[PromptRecord]) -> Result<RunOutput> {
    // resolve scorer names before any provider is built or called
    let blackbox: Vec<BlackBoxScorer> = match config.mode {
        Mode::Blackbox => scorer_names(config, &DEFAULT_BLACKBOX)
            .iter()
            .map(|s| s.parse().map_err(|e: uq_core::Error| Error::config(e.to_string())))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let whitebox: Vec<WhiteBoxScorer> = match config.mode {
        Mode::Whitebox => scorer_names(config, &DEFAULT_WHITEBOX)
            .iter()
            .map(|s| s.parse().map_err(|e: uq_core::Error| Error::config(e.to_string())))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let runtime = Runtime::build(config)?;
    run_with(config, &runtime, dataset, &blackbox, &whitebox)
}

fn run_with(
    config: &RunConfig,
    runtime: &Runtime,
    dataset: &[PromptRecord],
    blackbox: &[BlackBoxScorer],
    whitebox: &[WhiteBoxScorer],
) -> Result<RunOutput> {
    if dataset.is_empty() {
        return Err(Error::config("the dataset is empty"));
    }
    let engine = &runtime.engine;
    let prompts: Vec<String> = dataset.iter().map(|r| r.prompt.clone()).collect();
    let mut weights = None;
    let mut objective = None;
    let scored: Vec<Scored> = match config.mode {
        Mode::Blackbox => engine.blackbox(&prompts, blackbox)?,
        Mode::Whitebox => engine.whitebox(&prompts, whitebox)?,
        Mode::Panel => engine.panel(&prompts)?,
        Mode::Ensemble => engine.ensemble(&prompts, &ensemble_weights(config)?)?,
        Mode::Tune => {
            let items = require_ideals(dataset)?;
            let components = tune_components(config)?;
            let mut search = config.tune.search.clone();
            if let Some(seed) = config.seed {
                search.seed = seed;
            }
            let grader = runtime.grader(config)?;
            let run = engine.tune(&items, &components, config.tune.objective, &search, &grader)?;
            let tuned_on = run
                .results
                .iter()
                .zip(&run.grades)
                .filter(|(s, g)| g.is_some() && s.ensemble.is_some())
                .count();
            objective = Some(ObjectiveSummary {
                objective: run.outcome.objective,
                value: run.outcome.objective_value,
                threshold: run.outcome.weights.threshold(),
                tuned_on,
            });
            weights = Some(WeightsFile::from_outcome(&run.outcome, &search));
            run.results
        }
    };
    let results: Vec<ResultRecord> = dataset
        .iter()
        .zip(scored)
        .map(|(record, s)| ResultRecord {
            id: record.id.clone(),
            response: s.response,
            scores: s.scores,
            ensemble: s.ensemble,
            verdicts: s.verdicts,
            error: s.error,
        })
        .collect();
    let summary = summarize(config.mode, &results, runtime.counter.snapshot(), objective);
    Ok(RunOutput {
        results,
        summary,
        weights,
    })
}

fn summarize(mode: Mode, results: &[ResultRecord], calls: CallCounts, objective: Option<ObjectiveSummary>) -> Summary {
    let mut by_scorer: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in results {
        for (k, v) in &r.scores {
            by_scorer.entry(k.clone()).or_default().push(*v);
        }
    }
    let ensembles: Vec<f64> = results.iter().filter_map(|r| r.ensemble).collect();
    Summary {
        mode,
        records: results.len(),
        error_count: results.iter().filter(|r| r.error.is_some()).count(),
        scorers: by_scorer
            .into_iter()
            .filter_map(|(k, v)| ScoreStats::of(&v).map(|s| (k, s)))
            .collect(),
        ensemble: ScoreStats::of(&ensembles),
        provider_calls: calls,
        objective,
    }
}

/// Writes a summary as pretty JSON.
pub fn save_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    report::write_file(path, text.as_bytes())
}
