use std::path::{Path, PathBuf};

use serde::Deserialize;
use uq_core::ensemble::{Objective, SearchConfig};
use uq_core::judge::ScoringTemplate;

use crate::cache::CacheMode;
use crate::pipeline::Mode;
use crate::{Error, Result};

/// A chat provider.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Mock {
        /// Fixture JSON; without it every prompt gets `default_reply`.
        fixtures: Option<PathBuf>,
        #[serde(default = "yes")]
        logprobs: bool,
        default_reply: Option<String>,
        #[serde(default)]
        jitter_ms: u64,
    },
    Openai {
        model: String,
        base_url: Option<String>,
        #[serde(default = "yes")]
        logprobs: bool,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingConfig {
    Mock {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Openai {
        model: String,
        base_url: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EntailmentConfig {
    Mock {
        fixtures: Option<PathBuf>,
    },
    /// A JSON NLI service.
    Nli {
        url: String,
    },
    /// A chat model prompted for the three probabilities.
    Chat {
        backend: BackendConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    #[serde(default)]
    pub mode: CacheMode,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub name: String,
    pub template: ScoringTemplate,
    /// Defaults to the generator itself.
    pub backend: Option<BackendConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Component ids, weighted uniformly unless `weights` is given.
    pub components: Option<Vec<String>>,
    /// A weights file written by `uq tune`.
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraderKind {
    #[default]
    ExactMatch,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    #[serde(default = "default_objective")]
    pub objective: Objective,
    #[serde(default)]
    pub grader: GraderKind,
    /// Provider for the judge grader; defaults to the generator.
    pub grader_backend: Option<BackendConfig>,
    #[serde(default)]
    pub search: SearchConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            objective: Objective::RocAuc,
            grader: GraderKind::ExactMatch,
            grader_backend: None,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub results: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

/// A run configuration, read from one TOML document. Relative paths are
/// resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: Option<u64>,
    /// Black-box or white-box scorer names for those modes.
    pub scorers: Option<Vec<String>>,
    #[serde(default = "default_num_responses")]
    pub num_responses: u32,
    #[serde(default = "one")]
    pub original_temperature: f64,
    #[serde(default = "one")]
    pub candidate_temperature: f64,
    #[serde(default)]
    pub judge_temperature: f64,
    #[serde(default)]
    pub use_best: bool,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    pub judge_template: Option<PathBuf>,
    #[serde(default = "default_self_judge")]
    pub self_judge_template: ScoringTemplate,
    pub backend: BackendConfig,
    pub embedding: Option<EmbeddingConfig>,
    pub entailment: Option<EntailmentConfig>,
    pub cache: Option<CacheConfig>,
    #[serde(default)]
    pub judges: Vec<JudgeConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub tune: TuneConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_timeout() -> u64 {
    120
}

fn default_dimension() -> usize {
    64
}

fn default_num_responses() -> u32 {
    5
}

fn default_max_in_flight() -> usize {
    4
}

fn default_objective() -> Objective {
    Objective::RocAuc
}

fn default_self_judge() -> ScoringTemplate {
    ScoringTemplate::Ternary
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub cache_mode: Option<CacheMode>,
    pub num_responses: Option<u32>,
    pub use_best: Option<bool>,
    pub max_in_flight: Option<usize>,
    pub weights: Option<PathBuf>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_backend(base: &Path, b: &mut BackendConfig) {
    if let BackendConfig::Mock { fixtures: Some(p), .. } = b {
        resolve(base, p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve_backend(base, &mut self.backend);
        for j in &mut self.judges {
            if let Some(b) = &mut j.backend {
                resolve_backend(base, b);
            }
        }
        if let Some(b) = &mut self.tune.grader_backend {
            resolve_backend(base, b);
        }
        match &mut self.entailment {
            Some(EntailmentConfig::Mock { fixtures: Some(p) }) => resolve(base, p),
            Some(EntailmentConfig::Chat { backend }) => resolve_backend(base, backend),
            _ => {}
        }
        let paths = [
            self.judge_template.as_mut(),
            self.cache.as_mut().and_then(|c| c.path.as_mut()),
            self.ensemble.weights.as_mut(),
            self.output.results.as_mut(),
            self.output.summary.as_mut(),
            self.output.weights.as_mut(),
        ];
        for p in paths.into_iter().flatten() {
            resolve(base, p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(m) = o.cache_mode {
            self.cache.get_or_insert(CacheConfig {
                mode: CacheMode::Live,
                path: None,
            });
            if let Some(c) = &mut self.cache {
                c.mode = m;
            }
        }
        if let Some(n) = o.num_responses {
            self.num_responses = n;
        }
        if let Some(b) = o.use_best {
            self.use_best = b;
        }
        if let Some(n) = o.max_in_flight {
            self.max_in_flight = n;
        }
        if let Some(w) = &o.weights {
            self.ensemble.weights = Some(w.clone());
        }
    }

    pub fn cache_mode(&self) -> CacheMode {
        self.cache.as_ref().map(|c| c.mode).unwrap_or_default()
    }

    /// Checks the invariants that do not need providers.
    pub fn validate(&self) -> Result<()> {
        let mode = self.cache_mode();
        if mode != CacheMode::Live {
            if self.seed.is_none() {
                return Err(Error::config(format!("a seed is required in {mode} cache mode")));
            }
            if self.cache.as_ref().and_then(|c| c.path.as_ref()).is_none() {
                return Err(Error::config(format!("{mode} cache mode needs cache.path")));
            }
        }
        if self.num_responses == 0 {
            return Err(Error::config("num_responses must be at least 1"));
        }
        if self.max_in_flight == 0 {
            return Err(Error::config("max_in_flight must be at least 1"));
        }
        for t in [
            self.original_temperature,
            self.candidate_temperature,
            self.judge_temperature,
        ] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config(format!("temperature {t} is invalid")));
            }
        }
        let mut names: Vec<&str> = self.judges.iter().map(|j| j.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("judge name {:?} is used twice", w[0])));
        }
        Ok(())
    }
}
