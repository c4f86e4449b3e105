use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Named scorer → confidence in `[0, 1]` for one prompt.
pub type ScoreVector = BTreeMap<String, f64>;

/// One sampled token and its log-probability.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenLogprob {
    pub token: String,
    pub logprob: f64,
}

/// A sampled response with optional per-token log-probabilities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Generation {
    pub text: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub token_logprobs: Option<Vec<TokenLogprob>>,
}

impl Generation {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            token_logprobs: None,
        }
    }

    pub fn with_logprobs(text: impl Into<String>, tokens: Vec<TokenLogprob>) -> Self {
        Self {
            text: text.into(),
            token_logprobs: Some(tokens),
        }
    }

    /// Checks the logprob invariants: every value is a non-positive number,
    /// and a non-empty text carries a non-empty token list.
    pub fn validate(&self) -> Result<()> {
        if let Some(tokens) = &self.token_logprobs {
            if tokens.is_empty() && !self.text.is_empty() {
                return Err(Error::EmptySequence);
            }
            if let Some(bad) = tokens.iter().find(|t| t.logprob.is_nan() || t.logprob > 0.0) {
                return Err(Error::InvalidLogprob(bad.logprob));
            }
        }
        Ok(())
    }

    /// Clamps positive logprobs (rounding noise from some APIs) to zero and
    /// returns how many were touched. NaN is left alone for `validate` to reject.
    pub fn clamp_positive_logprobs(&mut self) -> usize {
        let mut clamped = 0;
        if let Some(tokens) = &mut self.token_logprobs {
            for t in tokens.iter_mut().filter(|t| t.logprob > 0.0) {
                t.logprob = 0.0;
                clamped += 1;
            }
        }
        clamped
    }
}

/// The three-way NLI distribution for a (premise, hypothesis) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntailmentJudgment {
    p_entail: f64,
    p_neutral: f64,
    p_contradict: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntailmentLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl EntailmentJudgment {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    /// Validates each probability in `[0, 1]` and the sum within
    /// [`Self::SUM_TOLERANCE`] of one. Values are never clamped.
    pub fn new(p_entail: f64, p_neutral: f64, p_contradict: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidProbabilities {
            entail: p_entail,
            neutral: p_neutral,
            contradict: p_contradict,
            reason,
        };
        if [p_entail, p_neutral, p_contradict]
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(invalid("each probability must lie in [0, 1]"));
        }
        let sum = p_entail + p_neutral + p_contradict;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(invalid("probabilities must sum to 1"));
        }
        Ok(Self {
            p_entail,
            p_neutral,
            p_contradict,
        })
    }

    pub fn p_entail(&self) -> f64 {
        self.p_entail
    }

    pub fn p_neutral(&self) -> f64 {
        self.p_neutral
    }

    pub fn p_contradict(&self) -> f64 {
        self.p_contradict
    }

    /// Argmax class. Entailment and contradiction must win strictly; any tie
    /// resolves to neutral.
    pub fn label(&self) -> EntailmentLabel {
        if self.p_entail > self.p_neutral && self.p_entail > self.p_contradict {
            EntailmentLabel::Entailment
        } else if self.p_contradict > self.p_entail && self.p_contradict > self.p_neutral {
            EntailmentLabel::Contradiction
        } else {
            EntailmentLabel::Neutral
        }
    }

    pub fn entails(&self) -> bool {
        self.label() == EntailmentLabel::Entailment
    }
}

/// A fixed-dimension embedding.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("embedding dimension must be positive".into()));
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn judgment_rejects_bad_sum() {
        let err = EntailmentJudgment::new(0.5, 0.3, 0.3).unwrap_err();
        assert!(matches!(err, Error::InvalidProbabilities { .. }));
        assert!(EntailmentJudgment::new(0.9, 0.05, 0.05).is_ok());
        assert!(EntailmentJudgment::new(1.2, -0.1, -0.1).is_err());
        assert!(EntailmentJudgment::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn label_ties_are_neutral() {
        let j = EntailmentJudgment::new(0.5, 0.5, 0.0).unwrap();
        assert_eq!(j.label(), EntailmentLabel::Neutral);
        let j = EntailmentJudgment::new(0.4, 0.2, 0.4).unwrap();
        assert_eq!(j.label(), EntailmentLabel::Neutral);
        let j = EntailmentJudgment::new(0.1, 0.2, 0.7).unwrap();
        assert_eq!(j.label(), EntailmentLabel::Contradiction);
        assert!(EntailmentJudgment::new(1.0, 0.0, 0.0).unwrap().entails());
    }

    #[test]
    fn generation_logprob_checks() {
        let tok = |lp| TokenLogprob {
            token: "a".into(),
            logprob: lp,
        };
        assert!(Generation::with_logprobs("a", alloc::vec![tok(-0.1), tok(0.0)])
            .validate()
            .is_ok());
        assert_eq!(
            Generation::with_logprobs("a", alloc::vec![]).validate(),
            Err(Error::EmptySequence)
        );
        let mut g = Generation::with_logprobs("a", alloc::vec![tok(1e-9), tok(-0.5)]);
        assert!(g.validate().is_err());
        assert_eq!(g.clamp_positive_logprobs(), 1);
        assert!(g.validate().is_ok());
    }
}
