//! Scorer identifiers as they appear in configs and score vectors.

use core::fmt;
use core::str::FromStr;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlackBoxScorer {
    ExactMatch,
    CosineSim,
    BertScore,
    NonContradiction,
    SemanticEntropy,
}

impl BlackBoxScorer {
    pub const ALL: [BlackBoxScorer; 5] = [
        Self::ExactMatch,
        Self::CosineSim,
        Self::BertScore,
        Self::NonContradiction,
        Self::SemanticEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ExactMatch => "exact_match",
            Self::CosineSim => "cosine_sim",
            Self::BertScore => "bert_score",
            Self::NonContradiction => "noncontradiction",
            Self::SemanticEntropy => "semantic_entropy",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Self::CosineSim | Self::BertScore)
    }

    pub fn needs_entailment(self) -> bool {
        matches!(self, Self::NonContradiction | Self::SemanticEntropy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WhiteBoxScorer {
    MinProbability,
    LengthNormalizedProbability,
}

impl WhiteBoxScorer {
    pub const ALL: [WhiteBoxScorer; 2] = [Self::MinProbability, Self::LengthNormalizedProbability];

    pub fn name(self) -> &'static str {
        match self {
            Self::MinProbability => "min_probability",
            Self::LengthNormalizedProbability => "length_normalized_probability",
        }
    }
}

macro_rules! named_enum_impls {
    ($ty:ty) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                <$ty>::ALL
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::UnknownScorer(s.into()))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum_impls!(BlackBoxScorer);
named_enum_impls!(WhiteBoxScorer);
