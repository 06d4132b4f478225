//! Comparison metrics computed over the same (response, knowledge) inputs:
//! token-overlap F1, corpus BLEU, end-to-end NLI, and a passthrough
//! BERTScore backend.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backends::{BertScorer, NliClassifier};
use crate::error::{Q2Error, Result};
use crate::scoring::{e2e_nli_score, FallbackOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMetric {
    OverlapF1,
    Bleu,
    E2eNli,
    Bertscore,
}

impl std::str::FromStr for BaselineMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "overlap" | "overlap_f1" => Ok(BaselineMetric::OverlapF1),
            "bleu" => Ok(BaselineMetric::Bleu),
            "e2e" | "e2e_nli" => Ok(BaselineMetric::E2eNli),
            "bertscore" => Ok(BaselineMetric::Bertscore),
            other => Err(format!("unknown baseline `{other}`")),
        }
    }
}

fn overlap_tokens(text: &str) -> Vec<String> {
    // plain lowercased whitespace tokenization; no article removal
    text.to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut c = HashMap::new();
    for t in tokens {
        *c.entry(t.as_str()).or_insert(0) += 1;
    }
    c
}

/// Unigram F1 between the whitespace tokens of lowercased response and
/// knowledge.
pub fn overlap_f1(response: &str, knowledge: &str) -> f64 {
    let r = overlap_tokens(response);
    let k = overlap_tokens(knowledge);
    if r.is_empty() && k.is_empty() {
        return 1.0;
    }
    if r.is_empty() || k.is_empty() {
        return 0.0;
    }
    let cr = counts(&r);
    let ck = counts(&k);
    let common: usize = cr
        .iter()
        .map(|(tok, &n)| n.min(ck.get(tok).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / r.len() as f64;
    let recall = common as f64 / k.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BleuSmoothing {
    None,
    /// Zero n-gram matches for n > 1 are replaced by epsilon counts.
    Epsilon(f64),
}

impl Default for BleuSmoothing {
    fn default() -> Self {
        BleuSmoothing::Epsilon(0.1)
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut c: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *c.entry(window).or_insert(0) += 1;
        }
    }
    c
}

/// Corpus BLEU-4 on the 0-100 scale, with the knowledge as the single
/// reference per response.
pub fn bleu(responses: &[String], knowledges: &[String], smoothing: BleuSmoothing) -> Result<f64> {
    if responses.len() != knowledges.len() {
        return Err(Q2Error::Precondition(format!(
            "bleu needs equal lengths, got {} candidates and {} references",
            responses.len(),
            knowledges.len()
        )));
    }
    if responses.is_empty() {
        return Err(Q2Error::Precondition("bleu needs at least one pair".into()));
    }
    let cands: Vec<Vec<String>> = responses.iter().map(|r| overlap_tokens(r)).collect();
    let refs: Vec<Vec<String>> = knowledges.iter().map(|k| overlap_tokens(k)).collect();

    let cand_len: usize = cands.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if cand_len == 0 {
        return Ok(0.0);
    }

    let mut log_precision_sum = 0.0;
    for n in 1..=4 {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (cand, reference) in cands.iter().zip(&refs) {
            let cc = ngram_counts(cand, n);
            let rc = ngram_counts(reference, n);
            for (gram, &count) in &cc {
                matched += count.min(rc.get(gram).copied().unwrap_or(0));
            }
            total += cand.len().saturating_sub(n - 1);
        }
        if total == 0 {
            return Ok(0.0);
        }
        let precision = if matched > 0 {
            matched as f64 / total as f64
        } else {
            match smoothing {
                BleuSmoothing::Epsilon(eps) if n > 1 => eps / total as f64,
                _ => return Ok(0.0),
            }
        };
        log_precision_sum += precision.ln();
    }
    let geo_mean = (log_precision_sum / 4.0).exp();
    let brevity_penalty = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(100.0 * brevity_penalty * geo_mean)
}

/// End-to-end NLI baseline with the knowledge as the premise.
pub fn e2e_nli_baseline(response: &str, knowledge: &str, nli: &dyn NliClassifier) -> Result<f64> {
    e2e_nli_score(knowledge, response, nli, FallbackOrientation::KnowledgePremise)
}

/// BERTScore passthrough. The scorer is an optional capability: when no
/// backend is configured the metric is skipped, not failed.
pub fn bertscore(
    response: &str,
    knowledge: &str,
    scorer: Option<&dyn BertScorer>,
) -> Result<Option<f64>> {
    match scorer {
        None => Ok(None),
        Some(scorer) => scorer.score(response, knowledge).map(Some),
    }
}
