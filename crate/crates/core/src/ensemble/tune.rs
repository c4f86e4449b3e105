use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{best_threshold, roc_auc_counts, ThresholdMetric};
use super::EnsembleWeights;
use crate::seed::{derive_seed, STREAM_TUNER};
use crate::{Error, Result, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Objective {
    RocAuc,
    F1,
    Accuracy,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Self::RocAuc, Self::F1, Self::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            Self::RocAuc => "roc_auc",
            Self::F1 => "f1",
            Self::Accuracy => "accuracy",
        }
    }

    pub fn threshold_dependent(self) -> bool {
        !matches!(self, Self::RocAuc)
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Precondition(alloc::format!("unknown objective `{s}`")))
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SearchConfig {
    /// Simplex grid resolution used when there are at most
    /// `grid_max_scorers` components.
    pub grid_step: f64,
    pub grid_max_scorers: usize,
    /// Dirichlet(1, ..., 1) samples for larger component sets.
    pub random_samples: usize,
    /// Coordinate refinement halves the step from `refine_start` down to
    /// `refine_end`.
    pub refine_start: f64,
    pub refine_end: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            grid_max_scorers: 3,
            random_samples: 20_000,
            refine_start: 0.05,
            refine_end: 0.00625,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningRecord {
    pub prompt: String,
    pub ideal_response: String,
    pub scorer_scores: ScoreVector,
    pub grade: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub weights: EnsembleWeights,
    pub objective: Objective,
    pub objective_value: f64,
    /// Number of weight vectors evaluated.
    pub evaluated: usize,
}

/// Objective of already-combined ensemble scores. Threshold-dependent
/// objectives also return the best swept threshold.
pub fn evaluate_objective(scores: &[f64], labels: &[bool], objective: Objective) -> Result<(f64, Option<f64>)> {
    match objective {
        Objective::RocAuc => Ok((roc_auc_counts(scores, labels)?.value(), None)),
        Objective::F1 => best_threshold(scores, labels, ThresholdMetric::F1).map(|(t, v)| (v, Some(t))),
        Objective::Accuracy => best_threshold(scores, labels, ThresholdMetric::Accuracy).map(|(t, v)| (v, Some(t))),
    }
}

/// All points of the simplex grid with resolution `1 / divisions`, as
/// integer compositions, ordered by support size and then lexicographically
/// descending. Vertices come first.
pub fn grid_points(k: usize, divisions: u32) -> Vec<Vec<u32>> {
    fn rec(k: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == k {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=remaining).rev() {
            prefix.push(c);
            rec(k, remaining - c, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    rec(k, divisions, &mut Vec::with_capacity(k), &mut out);
    // stable: keeps the descending-lexicographic order within a support size
    out.sort_by_key(|p| p.iter().filter(|&&c| c > 0).count());
    out
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

struct Problem {
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    objective: Objective,
    combined: Vec<f64>,
}

impl Problem {
    fn evaluate(&mut self, weights: &[f64]) -> Result<(f64, Option<f64>)> {
        for (out, row) in self.combined.iter_mut().zip(&self.rows) {
            *out = row.iter().zip(weights).map(|(s, w)| s * w).sum::<f64>().clamp(0.0, 1.0);
        }
        evaluate_objective(&self.combined, &self.labels, self.objective)
    }
}

struct Best {
    weights: Vec<f64>,
    value: f64,
    threshold: Option<f64>,
}

impl Best {
    /// Replaces the incumbent only on strict improvement, so ties keep the
    /// first vector in search order.
    fn offer(&mut self, weights: &[f64], (value, threshold): (f64, Option<f64>)) -> bool {
        if value > self.value {
            self.weights = weights.to_vec();
            self.value = value;
            self.threshold = threshold;
            true
        } else {
            false
        }
    }
}

/// Fits simplex weights that maximize `objective` on graded records.
///
/// With at most `grid_max_scorers` components the whole grid is searched.
/// Otherwise the vertices, the centroid and `random_samples` Dirichlet draws
/// are evaluated, followed by coordinate-wise refinement of the incumbent.
/// The search order is deterministic for a given seed, and ties keep the
/// first vector encountered.
pub fn tune_weights(
    records: &[TuningRecord],
    components: &[String],
    objective: Objective,
    search: &SearchConfig,
) -> Result<TuneOutcome> {
    if components.is_empty() {
        return Err(Error::EmptyScorerSet);
    }
    let positives = records.iter().filter(|r| r.grade).count();
    if records.len() < 2 || positives == 0 || positives == records.len() {
        return Err(Error::DegenerateLabels);
    }
    let rows = records
        .iter()
        .map(|r| {
            components
                .iter()
                .map(|c| {
                    r.scorer_scores
                        .get(c)
                        .copied()
                        .ok_or_else(|| Error::MissingScorer(c.clone()))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut problem = Problem {
        rows,
        labels: records.iter().map(|r| r.grade).collect(),
        objective,
        combined: alloc::vec![0.0; records.len()],
    };

    let k = components.len();
    let mut best = Best {
        weights: Vec::new(),
        value: f64::NEG_INFINITY,
        threshold: None,
    };
    let mut evaluated = 0usize;

    if k <= search.grid_max_scorers.max(1) {
        let divisions = grid_divisions(search.grid_step)?;
        for point in grid_points(k, divisions) {
            let w: Vec<f64> = point.iter().map(|&c| c as f64 / divisions as f64).collect();
            let r = problem.evaluate(&w)?;
            best.offer(&w, r);
            evaluated += 1;
        }
    } else {
        for i in 0..k {
            let mut w = alloc::vec![0.0; k];
            w[i] = 1.0;
            let r = problem.evaluate(&w)?;
            best.offer(&w, r);
            evaluated += 1;
        }
        let centroid = alloc::vec![1.0 / k as f64; k];
        let r = problem.evaluate(&centroid)?;
        best.offer(&centroid, r);
        evaluated += 1;

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(search.seed, STREAM_TUNER));
        let mut w = alloc::vec![0.0; k];
        for _ in 0..search.random_samples {
            sample_dirichlet_ones(&mut rng, &mut w);
            let r = problem.evaluate(&w)?;
            best.offer(&w, r);
            evaluated += 1;
        }

        let mut step = search.refine_start;
        while step >= search.refine_end && step > 0.0 {
            // each accepted move strictly improves a bounded objective; the
            // sweep cap only guards against pathological float cycles
            for _ in 0..1_000 {
                let mut improved = false;
                for i in 0..k {
                    for sign in [1.0, -1.0] {
                        let mut moved = best.weights.clone();
                        moved[i] += sign * step;
                        let moved = project_to_simplex(&moved);
                        let r = problem.evaluate(&moved)?;
                        evaluated += 1;
                        improved |= best.offer(&moved, r);
                    }
                }
                if !improved {
                    break;
                }
            }
            step /= 2.0;
        }
    }

    let entries = components.iter().cloned().zip(best.weights.iter().copied()).collect();
    Ok(TuneOutcome {
        weights: EnsembleWeights::new(entries, best.threshold)?,
        objective,
        objective_value: best.value,
        evaluated,
    })
}

fn grid_divisions(step: f64) -> Result<u32> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Precondition(alloc::format!("grid step {step} outside (0, 1]")));
    }
    let d = libm::round(1.0 / step);
    if libm::fabs(d * step - 1.0) > 1e-9 {
        return Err(Error::Precondition(alloc::format!(
            "grid step {step} does not divide 1"
        )));
    }
    Ok(d as u32)
}

/// Dirichlet(1, ..., 1) via normalized unit exponentials.
fn sample_dirichlet_ones(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        for x in out.iter_mut() {
            // 1 - U lies in (0, 1], so the log is finite
            *x = -libm::log(1.0 - rng.random::<f64>());
        }
        let sum: f64 = out.iter().sum();
        if sum > 0.0 {
            out.iter_mut().for_each(|x| *x /= sum);
            return;
        }
    }
}
