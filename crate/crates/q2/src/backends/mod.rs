//! Client interfaces to the four external model capabilities (span
//! annotation, question generation, extractive QA, NLI) plus the optional
//! BERTScore scorer.
//!
//! The JSON shapes defined here are the wire protocol: HTTP clients post
//! them to one endpoint per capability, and the transcript cache stores
//! them verbatim, so a recorded run can be replayed without any backend.

pub mod http;
pub mod mock;
pub mod transcript;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Q2Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// One token of a dependency parse, when the annotator provides parses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenParse {
    pub token: String,
    pub dependency_role: String,
    pub head_index: usize,
}

/// Named entities and noun phrases of an annotated text, with character
/// offsets into the original string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub entities: Vec<EntitySpan>,
    pub noun_phrases: Vec<PhraseSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parses: Option<Vec<TokenParse>>,
}

fn char_slice(text: &str, start: usize, end: usize) -> Option<String> {
    if end < start {
        return None;
    }
    let chars: Vec<char> = text.chars().collect();
    if end > chars.len() {
        return None;
    }
    Some(chars[start..end].iter().collect())
}

impl AnnotationResult {
    /// Checks that every reported span slices cleanly out of `text`.
    pub fn validate(&self, text: &str) -> Result<()> {
        for e in &self.entities {
            match char_slice(text, e.start, e.end) {
                Some(s) if s == e.text => {}
                _ => {
                    return Err(Q2Error::Protocol {
                        capability: "annotate".into(),
                        message: format!(
                            "entity span ({}, {}) does not match text `{}`",
                            e.start, e.end, e.text
                        ),
                    })
                }
            }
        }
        for p in &self.noun_phrases {
            match char_slice(text, p.start, p.end) {
                Some(s) if s == p.text => {}
                _ => {
                    return Err(Q2Error::Protocol {
                        capability: "annotate".into(),
                        message: format!(
                            "noun phrase span ({}, {}) does not match text `{}`",
                            p.start, p.end, p.text
                        ),
                    })
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub text: String,
    pub score: f64,
}

/// Beam-ordered question candidates for one answer span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgResult {
    pub questions: Vec<GeneratedQuestion>,
}

impl QgResult {
    pub fn validate(&self, top_n: usize) -> Result<()> {
        if self.questions.len() > top_n {
            return Err(Q2Error::Protocol {
                capability: "generate".into(),
                message: format!(
                    "backend returned {} questions for top_n {top_n}",
                    self.questions.len()
                ),
            });
        }
        for pair in self.questions.windows(2) {
            if pair[1].score > pair[0].score {
                return Err(Q2Error::Protocol {
                    capability: "generate".into(),
                    message: "question scores are not non-increasing".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Extractive QA outcome: an answer span of the context, or no answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaResult {
    pub answer: Option<AnswerSpan>,
    pub confidence: f64,
}

impl QaResult {
    pub fn no_answer() -> Self {
        QaResult {
            answer: None,
            confidence: 0.0,
        }
    }

    pub fn validate(&self, context: &str) -> Result<()> {
        if let Some(a) = &self.answer {
            match char_slice(context, a.start, a.end) {
                Some(s) if s == a.text => {}
                _ => {
                    return Err(Q2Error::Protocol {
                        capability: "answer".into(),
                        message: format!(
                            "answer span ({}, {}) does not match context slice for `{}`",
                            a.start, a.end, a.text
                        ),
                    })
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    pub probabilities: BTreeMap<NliLabel, f64>,
}

impl NliVerdict {
    /// Builds a verdict whose argmax is `label`, with the remaining mass
    /// split evenly over the other two labels.
    pub fn for_label(label: NliLabel, confidence: f64) -> Self {
        let rest = (1.0 - confidence) / 2.0;
        let mut probabilities = BTreeMap::new();
        for l in [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction] {
            probabilities.insert(l, if l == label { confidence } else { rest });
        }
        NliVerdict {
            label,
            probabilities,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.probabilities.values().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Q2Error::Protocol {
                capability: "nli".into(),
                message: format!("probabilities sum to {sum}, not 1"),
            });
        }
        let argmax = self
            .probabilities
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(l, _)| *l);
        if argmax != Some(self.label) {
            return Err(Q2Error::Protocol {
                capability: "nli".into(),
                message: "label is not the probability argmax".into(),
            });
        }
        Ok(())
    }
}

pub(crate) fn require_nonempty(value: &str, what: &str) -> Result<()> {
    if value.trim().is_empty() {
        Err(Q2Error::Precondition(format!("{what} must be non-empty")))
    } else {
        Ok(())
    }
}

pub trait Annotator: Send + Sync {
    fn annotate(&self, text: &str) -> Result<AnnotationResult>;
}

pub trait QuestionGenerator: Send + Sync {
    fn generate(&self, span: &str, context: &str, beam_size: usize, top_n: usize)
        -> Result<QgResult>;
}

pub trait QuestionAnswerer: Send + Sync {
    fn answer(&self, question: &str, context: &str) -> Result<QaResult>;
}

pub trait NliClassifier: Send + Sync {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict>;
}

pub trait BertScorer: Send + Sync {
    fn score(&self, candidate: &str, reference: &str) -> Result<f64>;
}

/// The full set of model clients the pipeline consumes. BERTScore is an
/// optional capability; when absent the baseline is skipped.
#[derive(Clone)]
pub struct Backends {
    pub annotator: Arc<dyn Annotator>,
    pub qg: Arc<dyn QuestionGenerator>,
    pub qa: Arc<dyn QuestionAnswerer>,
    pub nli: Arc<dyn NliClassifier>,
    pub bertscore: Option<Arc<dyn BertScorer>>,
}

impl Backends {
    /// The in-repo deterministic mock backends with their default tables.
    pub fn mocks() -> Self {
        Backends {
            annotator: Arc::new(mock::MockAnnotator::with_default_lexicon()),
            qg: Arc::new(mock::TemplateQg::with_default_rules()),
            qa: Arc::new(mock::SubstringQa::with_default_table()),
            nli: Arc::new(mock::RuleNli::with_default_rules()),
            bertscore: Some(Arc::new(mock::EqualityBertScorer::default())),
        }
    }
}

// Wire request bodies, one per capability endpoint.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotateRequest {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub span: String,
    pub context: String,
    pub beam_size: usize,
    pub top_n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub question: String,
    pub context: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BertScoreRequest {
    pub candidate: String,
    pub reference: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BertScoreResponse {
    pub f1: f64,
}
