//! Factual consistency scoring for knowledge-grounded dialogue.
//!
//! A response is scored by marking its informative spans, generating
//! questions whose answers should be those spans, answering each question
//! against the grounding knowledge, and comparing the two answers (exact
//! match, NLI, or token F1). The crate also ships the comparison baselines
//! (token overlap, BLEU, end-to-end NLI, BERTScore passthrough) and the
//! meta-evaluation machinery used to validate any response-level metric
//! against human annotations.

pub mod backends;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod metaeval;
pub mod pipeline;
pub mod report;
pub mod scoring;
pub mod types;

pub use error::{Q2Error, Result};
