use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine is undefined for an all-zero vector")]
    ZeroVector,

    #[error("invalid entailment probabilities ({entail}, {neutral}, {contradict}): {reason}")]
    InvalidProbabilities {
        entail: f64,
        neutral: f64,
        contradict: f64,
        reason: &'static str,
    },

    #[error("token probability sequence is empty")]
    EmptySequence,

    #[error("generation carries no token logprobs")]
    MissingLogprobs,

    #[error("invalid logprob {0}")]
    InvalidLogprob(f64),

    #[error("could not parse a {template} verdict from {reply:?}")]
    ParseFailure { template: &'static str, reply: String },

    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),

    #[error("unknown scoring template `{0}`")]
    UnknownTemplate(String),

    #[error("score vector has no value for `{0}`")]
    MissingScorer(String),

    #[error("labels must contain both classes")]
    DegenerateLabels,

    #[error("no scorers to combine")]
    EmptyScorerSet,

    #[error("invalid ensemble weights: {0}")]
    InvalidWeights(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}
