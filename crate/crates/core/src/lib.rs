//! Scoring primitives for response-level confidence estimation of LLM
//! generations.
//!
//! Everything in this crate is pure and allocation-only (`no_std` + `alloc`):
//! the consistency primitives used by black-box scorers, token-probability
//! scorers, semantic clustering and entropy, judge template rendering and
//! verdict parsing, and the weighted ensemble with its weight tuner.
//! Providers, caching and IO live in the `uq` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod ensemble;
mod error;
pub mod judge;
pub mod scorer;
pub mod seed;
pub mod semantic;
pub mod similarity;
mod types;
pub mod whitebox;

pub use error::{Error, Result};
pub use scorer::{BlackBoxScorer, WhiteBoxScorer};
pub use types::{EmbeddingVector, EntailmentJudgment, EntailmentLabel, Generation, ScoreVector, TokenLogprob};
