//! Answer-pair comparison and score aggregation.
//!
//! A question's score is 1 for a normalized exact match or NLI entailment,
//! 0 for contradiction or a knowledge-side no-answer, and the token-level F1
//! of the two answers in the neutral case. Question scores average into a
//! response score; response scores average into a system score. When no
//! valid questions survive filtering, an end-to-end NLI verdict over
//! (knowledge, response) is used as a fallback.

use serde::{Deserialize, Serialize};

use crate::backends::{Backends, NliClassifier, NliLabel};
use crate::error::{Q2Error, Result};
use crate::pipeline::{self, EvalConfig};
use crate::types::{DialogueExample, GoldLabel};

/// SQuAD-style answer normalization: lowercase, strip punctuation, drop the
/// articles {a, an, the}, split on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { '\0' })
        .filter(|&c| c != '\0')
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

fn token_counts(tokens: &[String]) -> std::collections::HashMap<&str, usize> {
    let mut counts = std::collections::HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Token-level F1 over the normalized multiset overlap of two answers.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta = normalize_answer(a);
    let tb = normalize_answer(b);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let ca = token_counts(&ta);
    let cb = token_counts(&tb);
    let common: usize = ca
        .iter()
        .map(|(tok, &n)| n.min(cb.get(tok).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / ta.len() as f64;
    let recall = common as f64 / tb.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictPath {
    ExactMatch,
    NliEntailment,
    NliContradiction,
    NliNeutralF1,
    NoAnswer,
}

/// One (response answer, knowledge answer) comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    #[serde(rename = "text")]
    pub question: String,
    pub span: String,
    pub response_answer: String,
    pub knowledge_answer: Option<String>,
    pub verdict: VerdictPath,
    pub score: f64,
}

/// Compares the response answer with the knowledge answer. Exact matches
/// never call NLI; otherwise the two answers are each concatenated after the
/// question and classified, with the knowledge side as the premise.
pub fn compare_answers(
    question: &str,
    response_answer: &str,
    knowledge_answer: Option<&str>,
    nli: &dyn NliClassifier,
) -> Result<QuestionScore> {
    if response_answer.trim().is_empty() {
        return Err(Q2Error::Precondition(
            "response answer must be non-empty".into(),
        ));
    }
    let base = |knowledge_answer: Option<&str>, verdict, score| QuestionScore {
        question: question.to_string(),
        span: response_answer.to_string(),
        response_answer: response_answer.to_string(),
        knowledge_answer: knowledge_answer.map(str::to_string),
        verdict,
        score,
    };
    let Some(ka) = knowledge_answer else {
        return Ok(base(None, VerdictPath::NoAnswer, 0.0));
    };
    if normalize_answer(response_answer) == normalize_answer(ka) {
        return Ok(base(Some(ka), VerdictPath::ExactMatch, 1.0));
    }
    let premise = format!("{question} {ka}");
    let hypothesis = format!("{question} {response_answer}");
    let verdict = nli.classify(&premise, &hypothesis)?;
    let (path, score) = match verdict.label {
        NliLabel::Entailment => (VerdictPath::NliEntailment, 1.0),
        NliLabel::Contradiction => (VerdictPath::NliContradiction, 0.0),
        NliLabel::Neutral => (VerdictPath::NliNeutralF1, token_f1(response_answer, ka)),
    };
    Ok(base(Some(ka), path, score))
}

/// Which of knowledge/response plays the NLI premise in the end-to-end
/// fallback. The default takes the knowledge as the premise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FallbackOrientation {
    #[default]
    KnowledgePremise,
    KnowledgeHypothesis,
}

pub fn e2e_nli_score(
    knowledge: &str,
    response: &str,
    nli: &dyn NliClassifier,
    orientation: FallbackOrientation,
) -> Result<f64> {
    if knowledge.trim().is_empty() || response.trim().is_empty() {
        return Err(Q2Error::Precondition(
            "knowledge and response must be non-empty".into(),
        ));
    }
    let (premise, hypothesis) = match orientation {
        FallbackOrientation::KnowledgePremise => (knowledge, response),
        FallbackOrientation::KnowledgeHypothesis => (response, knowledge),
    };
    let verdict = nli.classify(premise, hypothesis)?;
    Ok(match verdict.label {
        NliLabel::Entailment => 1.0,
        NliLabel::Neutral => 0.5,
        NliLabel::Contradiction => 0.0,
    })
}

/// Aggregated score for one response, with per-question explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseScore {
    pub example_id: String,
    pub question_scores: Vec<QuestionScore>,
    pub value: f64,
    pub used_fallback: bool,
    pub valid_question_count: usize,
}

/// Scores one example end to end: candidate spans, question generation,
/// filtering, knowledge answers, answer comparison, aggregation.
pub fn score_response(
    example: &DialogueExample,
    config: &EvalConfig,
    backends: &Backends,
) -> Result<ResponseScore> {
    score_response_inner(example, config, backends)
        .map_err(|e| e.with_example(&example.id))
}

fn score_response_inner(
    example: &DialogueExample,
    config: &EvalConfig,
    backends: &Backends,
) -> Result<ResponseScore> {
    example.validate()?;
    let spans = pipeline::extract_candidates(&example.response, backends.annotator.as_ref())?;
    let mut per_span = Vec::new();
    for span in &spans {
        let candidates = pipeline::candidates_for_span(
            span,
            &example.response,
            config,
            backends,
        )?;
        per_span.push((span.clone(), candidates));
    }
    let selected = pipeline::select_questions(&per_span, config.variant);

    let mut question_scores = Vec::new();
    for (span, question) in &selected {
        let ka = pipeline::knowledge_answer(
            &question.text,
            &example.knowledge,
            backends.qa.as_ref(),
        )?;
        let score = compare_answers(
            &question.text,
            &span.text,
            ka.answer.as_ref().map(|a| a.text.as_str()),
            backends.nli.as_ref(),
        )?;
        question_scores.push(score);
    }

    let valid_question_count = question_scores.len();
    let (value, used_fallback) = if valid_question_count == 0 {
        let value = e2e_nli_score(
            &example.knowledge,
            &example.response,
            backends.nli.as_ref(),
            config.fallback_orientation,
        )?;
        (value, true)
    } else {
        let sum: f64 = question_scores.iter().map(|q| q.score).sum();
        (sum / valid_question_count as f64, false)
    };

    Ok(ResponseScore {
        example_id: example.id.clone(),
        question_scores,
        value,
        used_fallback,
        valid_question_count,
    })
}

/// System-level aggregate over response scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScore {
    pub value: f64,
    pub response_count: usize,
    /// Fraction of responses with at least one valid question.
    pub question_coverage: f64,
    /// Fraction of asked knowledge questions that had no answer.
    pub no_answer_rate: f64,
}

pub fn score_system(scores: &[ResponseScore]) -> Result<SystemScore> {
    if scores.is_empty() {
        return Err(Q2Error::Precondition(
            "cannot aggregate an empty score list".into(),
        ));
    }
    let n = scores.len();
    let value = scores.iter().map(|s| s.value).sum::<f64>() / n as f64;
    let covered = scores.iter().filter(|s| s.valid_question_count >= 1).count();
    let total_questions: usize = scores.iter().map(|s| s.question_scores.len()).sum();
    let no_answer: usize = scores
        .iter()
        .flat_map(|s| &s.question_scores)
        .filter(|q| q.verdict == VerdictPath::NoAnswer)
        .count();
    Ok(SystemScore {
        value,
        response_count: n,
        question_coverage: covered as f64 / n as f64,
        no_answer_rate: if total_questions == 0 {
            0.0
        } else {
            no_answer as f64 / total_questions as f64
        },
    })
}

/// Binary consistency decision: strictly above the threshold is consistent.
pub fn dnli_decide(score: f64, threshold: f64) -> GoldLabel {
    if score > threshold {
        GoldLabel::Consistent
    } else {
        GoldLabel::Inconsistent
    }
}

/// Convenience: scores every example of a dataset in a deterministic order.
pub fn score_dataset(
    examples: &[DialogueExample],
    config: &EvalConfig,
    backends: &Backends,
    workers: usize,
) -> Result<Vec<ResponseScore>> {
    if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Q2Error::Validation(format!("worker pool: {e}")))?;
        pool.install(|| {
            examples
                .par_iter()
                .map(|ex| score_response(ex, config, backends))
                .collect()
        })
    } else {
        examples
            .iter()
            .map(|ex| score_response(ex, config, backends))
            .collect()
    }
}
