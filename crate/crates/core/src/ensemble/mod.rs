//! Weighted-average ensembles of scorer outputs, classification metrics and
//! the weight tuner.

mod metrics;
mod tune;

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result, ScoreVector};

pub use metrics::{best_threshold, roc_auc, roc_auc_counts, threshold_metric, AucCounts, ThresholdMetric};
pub use tune::{
    evaluate_objective, grid_points, project_to_simplex, tune_weights, Objective, SearchConfig, TuneOutcome,
    TuningRecord,
};

/// Component ids of the off-the-shelf ensemble: exact match,
/// non-contradiction and a self-judge by the generating model.
pub const OFF_THE_SHELF: [&str; 3] = ["exact_match", "noncontradiction", "self_judge"];

/// Tolerance on the weight sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Nonnegative weights over named scorers, summing to one, with an optional
/// decision threshold for threshold-dependent objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleWeights {
    entries: Vec<(String, f64)>,
    threshold: Option<f64>,
}

impl EnsembleWeights {
    pub fn new(entries: Vec<(String, f64)>, threshold: Option<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyScorerSet);
        }
        for (i, (id, w)) in entries.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidWeights(alloc::format!("weight for `{id}` is {w}")));
            }
            if entries[..i].iter().any(|(other, _)| other == id) {
                return Err(Error::InvalidWeights(alloc::format!("`{id}` listed twice")));
            }
        }
        let sum: f64 = entries.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(alloc::format!("weights sum to {sum}")));
        }
        if let Some(t) = threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidWeights(alloc::format!("threshold {t} outside [0, 1]")));
            }
        }
        Ok(Self { entries, threshold })
    }

    /// Equal weights over `ids`.
    pub fn uniform<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        let w = 1.0 / ids.len() as f64;
        Self::new(ids.iter().map(|id| (String::from(id.as_ref()), w)).collect(), None)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn weight(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == id).map(|(_, w)| *w)
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `sum_i w_i * s_i` over the weighted components.
pub fn ensemble_score(scores: &ScoreVector, weights: &EnsembleWeights) -> Result<f64> {
    let mut total = 0.0;
    for (id, w) in &weights.entries {
        let s = scores.get(id).ok_or_else(|| Error::MissingScorer(id.clone()))?;
        total += w * s;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Uniform weights over [`OFF_THE_SHELF`].
pub fn default_ensemble() -> EnsembleWeights {
    EnsembleWeights::uniform(&OFF_THE_SHELF).expect("three uniform weights are valid")
}
