//! Confidence from the generated response's own token probabilities.

use alloc::vec::Vec;

use crate::{Error, Generation, Result, WhiteBoxScorer};

/// Non-empty sequence of token log-probabilities, each `<= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProbSequence(Vec<f64>);

impl TokenProbSequence {
    pub fn new(logprobs: Vec<f64>) -> Result<Self> {
        if logprobs.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(&bad) = logprobs.iter().find(|lp| lp.is_nan() || **lp > 0.0) {
            return Err(Error::InvalidLogprob(bad));
        }
        Ok(Self(logprobs))
    }

    pub fn from_generation(generation: &Generation) -> Result<Self> {
        let tokens = generation.token_logprobs.as_ref().ok_or(Error::MissingLogprobs)?;
        Self::new(tokens.iter().map(|t| t.logprob).collect())
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.0
    }

    fn min_logprob(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Probability of the least likely token.
pub fn min_probability(seq: &TokenProbSequence) -> f64 {
    libm::exp(seq.min_logprob())
}

/// Geometric mean of token probabilities, `exp(mean logprob)`.
pub fn length_normalized_probability(seq: &TokenProbSequence) -> f64 {
    let mean = seq.0.iter().sum::<f64>() / seq.0.len() as f64;
    // mean >= min holds exactly; summation rounding must not break it
    libm::exp(mean.max(seq.min_logprob()))
}

pub fn score(scorer: WhiteBoxScorer, seq: &TokenProbSequence) -> f64 {
    match scorer {
        WhiteBoxScorer::MinProbability => min_probability(seq),
        WhiteBoxScorer::LengthNormalizedProbability => length_normalized_probability(seq),
    }
}
