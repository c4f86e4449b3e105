use alloc::vec::Vec;

use crate::{Error, Result};

/// ROC-AUC as an exact ratio: `twice_wins / (2 * pairs)`, where a
/// (positive, negative) pair contributes 2 when the positive scores higher
/// and 1 on a tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AucCounts {
    pub twice_wins: u64,
    pub pairs: u64,
}

impl AucCounts {
    pub fn value(&self) -> f64 {
        self.twice_wins as f64 / (2 * self.pairs) as f64
    }
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Precondition("scores contain NaN".into()));
    }
    Ok(())
}

/// Mann–Whitney pair counts in `O(n log n)` by walking tie groups in
/// ascending score order.
pub fn roc_auc_counts(scores: &[f64], labels: &[bool]) -> Result<AucCounts> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut twice_wins = 0u64;
    let mut negatives_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut pos, mut neg) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        twice_wins += pos * (2 * negatives_below + neg);
        negatives_below += neg;
    }
    Ok(AucCounts {
        twice_wins,
        pairs: positives * negatives,
    })
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    roc_auc_counts(scores, labels).map(|c| c.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMetric {
    F1,
    Accuracy,
}

#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: u64,
    fp: u64,
    tn: u64,
    fn_: u64,
}

impl Confusion {
    fn metric(&self, kind: ThresholdMetric) -> f64 {
        match kind {
            ThresholdMetric::F1 => {
                if self.tp == 0 {
                    0.0
                } else {
                    (2 * self.tp) as f64 / (2 * self.tp + self.fp + self.fn_) as f64
                }
            }
            ThresholdMetric::Accuracy => (self.tp + self.tn) as f64 / (self.tp + self.tn + self.fp + self.fn_) as f64,
        }
    }
}

fn check_metric_input(scores: &[f64], labels: &[bool], kind: ThresholdMetric) -> Result<()> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::Precondition("no scores".into()));
    }
    if kind == ThresholdMetric::F1 && !labels.iter().any(|&l| l) {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// F1 or accuracy when predicting positive iff `score >= threshold`.
pub fn threshold_metric(scores: &[f64], labels: &[bool], threshold: f64, kind: ThresholdMetric) -> Result<f64> {
    check_metric_input(scores, labels, kind)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Precondition(alloc::format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c.metric(kind))
}

/// Best threshold over `{0, 1}` plus the midpoints between adjacent distinct
/// scores. Returns `(threshold, metric)`; ties keep the lowest threshold.
pub fn best_threshold(scores: &[f64], labels: &[bool], kind: ThresholdMetric) -> Result<(f64, f64)> {
    check_metric_input(scores, labels, kind)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // positives_from[k]: positives among sorted[k..]
    let mut positives_from = alloc::vec![0u64; sorted.len() + 1];
    for k in (0..sorted.len()).rev() {
        positives_from[k] = positives_from[k + 1] + labels[order[k]] as u64;
    }
    let total_pos = positives_from[0];
    let total_neg = sorted.len() as u64 - total_pos;

    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(0.0);
    for pair in sorted.windows(2) {
        if pair[0] != pair[1] {
            candidates.push((pair[0] + pair[1]) / 2.0);
        }
    }
    candidates.push(1.0);

    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for t in candidates {
        let first = sorted.partition_point(|&s| s < t);
        let predicted = (sorted.len() - first) as u64;
        let tp = positives_from[first];
        let fp = predicted - tp;
        let c = Confusion {
            tp,
            fp,
            fn_: total_pos - tp,
            tn: total_neg - fp,
        };
        let m = c.metric(kind);
        if m > best.1 {
            best = (t, m);
        }
    }
    Ok(best)
}
