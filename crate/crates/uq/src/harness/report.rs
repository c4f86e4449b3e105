//! Result records, the weights file, and report emission.
//!
//! CSV reports have the columns `id`, `response`, one column per scorer
//! (sorted by name, the union over all records), then `ensemble` and `error`
//! when any record has them. Absent values are written as `null`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use uq_core::ensemble::{EnsembleWeights, Objective, SearchConfig, TuneOutcome};
use uq_core::judge::JudgeVerdict;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub response: Option<String>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<JudgeVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    /// Every score and the ensemble must lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        let bad = self
            .scores
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .chain(self.ensemble.map(|e| ("ensemble", e)))
            .find(|(_, v)| !(0.0..=1.0).contains(v));
        match bad {
            Some((k, v)) => Err(Error::Report(format!(
                "record {:?}: {k} = {v} is outside [0, 1]",
                self.id
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Jsonl,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(Error::config(format!("unknown report format {other:?}"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jsonl => "jsonl",
            Self::Csv => "csv",
        })
    }
}

pub fn to_jsonl(results: &[ResultRecord]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        r.validate()?;
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn number(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |x| x.to_string())
}

pub fn to_csv(results: &[ResultRecord]) -> Result<String> {
    let columns: BTreeSet<&str> = results
        .iter()
        .flat_map(|r| r.scores.keys().map(String::as_str))
        .collect();
    let with_ensemble = results.iter().any(|r| r.ensemble.is_some());
    let with_error = results.iter().any(|r| r.error.is_some());

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = vec!["id", "response"];
    header.extend(&columns);
    if with_ensemble {
        header.push("ensemble");
    }
    if with_error {
        header.push("error");
    }
    let csv_err = |e: csv::Error| Error::Report(e.to_string());
    writer.write_record(&header).map_err(csv_err)?;
    for r in results {
        r.validate()?;
        let mut row = vec![r.id.clone(), r.response.clone().unwrap_or_else(|| "null".into())];
        row.extend(columns.iter().map(|c| number(r.scores.get(*c).copied())));
        if with_ensemble {
            row.push(number(r.ensemble));
        }
        if with_error {
            row.push(r.error.clone().unwrap_or_else(|| "null".into()));
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Report(e.to_string()))
}

/// Writes the report, creating nothing when `results` is empty or invalid.
pub fn emit_report(results: &[ResultRecord], format: ReportFormat, path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Report("no results to write".into()));
    }
    let text = match format {
        ReportFormat::Jsonl => to_jsonl(results)?,
        ReportFormat::Csv => to_csv(results)?,
    };
    write_file(path, text.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn load_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Dataset {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Tuned ensemble weights as persisted by `uq tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    /// Component id to weight, in component order.
    pub weights: IndexMap<String, f64>,
    pub threshold: Option<f64>,
    pub objective: Objective,
    pub objective_value: f64,
    pub search_config: SearchConfig,
    pub seed: u64,
}

impl WeightsFile {
    pub fn from_outcome(outcome: &TuneOutcome, search: &SearchConfig) -> Self {
        Self {
            weights: outcome.weights.entries().iter().cloned().collect(),
            threshold: outcome.weights.threshold(),
            objective: outcome.objective,
            objective_value: outcome.objective_value,
            search_config: search.clone(),
            seed: search.seed,
        }
    }

    pub fn ensemble_weights(&self) -> Result<EnsembleWeights> {
        let entries = self.weights.iter().map(|(k, v)| (k.clone(), *v)).collect();
        Ok(EnsembleWeights::new(entries, self.threshold)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }
}
