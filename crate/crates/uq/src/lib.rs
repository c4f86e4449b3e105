//! Generate-and-score confidence estimation for LLM responses.
//!
//! This crate wires the primitives of [`uq_core`] to providers: chat
//! generation, embeddings and entailment, a record/replay cache, the
//! black-box, white-box, judge-panel and ensemble pipelines, and the batch
//! harness behind the `uq` binary.

pub mod backend;
pub mod cache;
mod error;
pub mod harness;
pub mod pipeline;
pub mod pool;

pub use error::{Error, Result};
pub use uq_core;
