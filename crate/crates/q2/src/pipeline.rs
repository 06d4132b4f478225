//! Per-response orchestration: informative spans in the response become
//! target answers, questions are generated for each span, round-trip and
//! pronoun filters discard unreliable questions, and the survivors are
//! answered against the knowledge.

use serde::{Deserialize, Serialize};

use crate::backends::{Annotator, Backends, QaResult, QuestionAnswerer, TokenParse};
use crate::error::{Q2Error, Result};
use crate::scoring::{normalize_answer, FallbackOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Entity,
    NounPhrase,
}

/// A named entity or noun phrase of the response, used as a target answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativeSpan {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub kind: SpanKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionStatus {
    Valid,
    FilteredRoundtrip,
    FilteredPersonal,
    FilteredDuplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateQuestion {
    pub text: String,
    pub beam_rank: usize,
    pub status: QuestionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Top-ranked question that passed filtering, per span.
    Top1Filtered,
    /// Every question that passed filtering.
    AllN,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "top1" | "top1_filtered" | "top1-filtered" => Ok(Variant::Top1Filtered),
            "all-n" | "all_n" | "all" => Ok(Variant::AllN),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    Beam,
    /// One question per answer candidate.
    Greedy,
}

impl std::str::FromStr for Decoding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "beam" => Ok(Decoding::Beam),
            "greedy" => Ok(Decoding::Greedy),
            other => Err(format!("unknown decoding `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Wow,
    Dnli,
}

/// Evaluation configuration. `new_dnli` forces the personal-pronoun filter
/// off, since persona statements are exactly what DNLI pairs assert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub top_n: usize,
    pub beam_size: usize,
    pub variant: Variant,
    pub decoding: Decoding,
    pub mode: EvalMode,
    pub personal_filter: bool,
    pub dnli_threshold: f64,
    pub seed: u64,
    /// Require strict string equality in the round-trip check instead of
    /// normalized equality.
    pub roundtrip_strict: bool,
    pub fallback_orientation: FallbackOrientation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            top_n: 5,
            beam_size: 5,
            variant: Variant::Top1Filtered,
            decoding: Decoding::Beam,
            mode: EvalMode::Wow,
            personal_filter: true,
            dnli_threshold: 0.1,
            seed: 0,
            roundtrip_strict: false,
            fallback_orientation: FallbackOrientation::KnowledgePremise,
        }
    }
}

impl EvalConfig {
    pub fn new_dnli() -> Self {
        EvalConfig {
            mode: EvalMode::Dnli,
            personal_filter: false,
            ..Default::default()
        }
    }

    /// Re-establishes the mode invariant after field-level edits.
    pub fn normalized(mut self) -> Self {
        if self.mode == EvalMode::Dnli {
            self.personal_filter = false;
        }
        self
    }

    /// Questions requested per span; greedy decoding generates one.
    pub fn effective_top_n(&self) -> usize {
        match self.decoding {
            Decoding::Beam => self.top_n,
            Decoding::Greedy => 1,
        }
    }

    pub fn effective_beam_size(&self) -> usize {
        self.beam_size.max(self.effective_top_n())
    }
}

fn normalized_key(text: &str) -> String {
    normalize_answer(text).join(" ")
}

/// Marks entity and noun-phrase spans of the response, merged and
/// deduplicated by normalized text (first occurrence kept, entity kind
/// preferred), ordered by start offset.
pub fn extract_candidates(
    response: &str,
    annotator: &dyn Annotator,
) -> Result<Vec<InformativeSpan>> {
    if response.trim().is_empty() {
        return Err(Q2Error::Precondition("response must be non-empty".into()));
    }
    let annotation = annotator.annotate(response)?;
    let mut spans: Vec<InformativeSpan> = Vec::new();
    for e in &annotation.entities {
        spans.push(InformativeSpan {
            text: e.text.clone(),
            char_start: e.start,
            char_end: e.end,
            kind: SpanKind::Entity,
        });
    }
    for p in &annotation.noun_phrases {
        spans.push(InformativeSpan {
            text: p.text.clone(),
            char_start: p.start,
            char_end: p.end,
            kind: SpanKind::NounPhrase,
        });
    }
    spans.sort_by_key(|s| (s.char_start, s.char_end));

    let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut kept: Vec<InformativeSpan> = Vec::new();
    for span in spans {
        let key = normalized_key(&span.text);
        if key.is_empty() {
            continue;
        }
        match seen.get(&key) {
            None => {
                seen.insert(key, kept.len());
                kept.push(span);
            }
            Some(&idx) => {
                // same fact seen twice; keep the first, upgrade to entity
                if span.kind == SpanKind::Entity
                    && kept[idx].kind == SpanKind::NounPhrase
                    && kept[idx].char_start == span.char_start
                    && kept[idx].char_end == span.char_end
                {
                    kept[idx].kind = SpanKind::Entity;
                }
            }
        }
    }
    Ok(kept)
}

/// Round-trip validation: the question must be answerable from the response
/// with (the normalized form of) the original span.
pub fn validate_roundtrip(
    question: &str,
    span_text: &str,
    response: &str,
    qa: &dyn QuestionAnswerer,
    strict: bool,
) -> Result<bool> {
    let result = qa.answer(question, response)?;
    Ok(match result.answer {
        None => false,
        Some(answer) => {
            if strict {
                answer.text == span_text
            } else {
                normalize_answer(&answer.text) == normalize_answer(span_text)
            }
        }
    })
}

fn whole_token_present(question: &str, targets: &[&str]) -> bool {
    question
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .any(|t| {
            let t = t.to_lowercase();
            targets.contains(&t.as_str())
        })
}

/// Personal-pronoun filter: discard questions mentioning possessive
/// "my"/"your" anywhere, or with "I"/"you" as the subject. Subject detection
/// uses the dependency parse when available, otherwise whole-token presence.
pub fn filter_personal(question: &str, parses: Option<&[TokenParse]>) -> bool {
    if whole_token_present(question, &["my", "your"]) {
        return true;
    }
    match parses {
        Some(parses) => parses.iter().any(|p| {
            let tok = p.token.to_lowercase();
            (tok == "i" || tok == "you") && p.dependency_role.contains("subj")
        }),
        None => whole_token_present(question, &["i", "you"]),
    }
}

/// Generates and filters the question candidates for one span. Statuses are
/// assigned in order: duplicate, personal, round-trip; survivors are valid.
pub fn candidates_for_span(
    span: &InformativeSpan,
    response: &str,
    config: &EvalConfig,
    backends: &Backends,
) -> Result<Vec<CandidateQuestion>> {
    let generated = backends.qg.generate(
        &span.text,
        response,
        config.effective_beam_size(),
        config.effective_top_n(),
    )?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (idx, q) in generated.questions.iter().enumerate() {
        let beam_rank = idx + 1;
        let status = if !seen.insert(q.text.clone()) {
            QuestionStatus::FilteredDuplicate
        } else if config.personal_filter && {
            let parses = backends.annotator.annotate(&q.text)?.parses;
            filter_personal(&q.text, parses.as_deref())
        } {
            QuestionStatus::FilteredPersonal
        } else if !validate_roundtrip(
            &q.text,
            &span.text,
            response,
            backends.qa.as_ref(),
            config.roundtrip_strict,
        )? {
            QuestionStatus::FilteredRoundtrip
        } else {
            QuestionStatus::Valid
        };
        out.push(CandidateQuestion {
            text: q.text.clone(),
            beam_rank,
            status,
        });
    }
    Ok(out)
}

/// Variant selection over the per-span candidates: either the top-ranked
/// valid question per span, or every valid question.
pub fn select_questions(
    per_span: &[(InformativeSpan, Vec<CandidateQuestion>)],
    variant: Variant,
) -> Vec<(InformativeSpan, CandidateQuestion)> {
    let mut selected = Vec::new();
    for (span, candidates) in per_span {
        let valid = candidates
            .iter()
            .filter(|c| c.status == QuestionStatus::Valid);
        match variant {
            Variant::Top1Filtered => {
                if let Some(best) = valid.min_by_key(|c| c.beam_rank) {
                    selected.push((span.clone(), best.clone()));
                }
            }
            Variant::AllN => {
                for c in valid {
                    selected.push((span.clone(), c.clone()));
                }
            }
        }
    }
    selected
}

/// Marks the answer span for a question in the knowledge; no-answer is a
/// legitimate outcome, not an error.
pub fn knowledge_answer(
    question: &str,
    knowledge: &str,
    qa: &dyn QuestionAnswerer,
) -> Result<QaResult> {
    qa.answer(question, knowledge)
}
