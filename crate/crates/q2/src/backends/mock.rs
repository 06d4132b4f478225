//! Deterministic reference backends. These are pure functions of their rule
//! tables, so the whole pipeline is testable without model servers: a
//! lexicon annotator, a template question generator, a substring-match QA
//! with a no-answer default, and a rule-table NLI with reflexive entailment.

use std::collections::HashMap;

use super::{
    AnnotationResult, Annotator, AnswerSpan, BertScorer, EntitySpan, GeneratedQuestion, NliLabel,
    NliVerdict, NliClassifier, PhraseSpan, QaResult, QgResult, QuestionAnswerer,
    QuestionGenerator, TokenParse, require_nonempty,
};
use crate::error::{Q2Error, Result};

fn lower(s: &str) -> String {
    s.to_lowercase()
}

/// All word-boundary occurrences of `needle` in `haystack`, case-insensitive,
/// as (char_start, char_end, original_text) triples.
fn find_all_ci(haystack: &str, needle: &str) -> Vec<(usize, usize, String)> {
    let hay: Vec<char> = haystack.chars().collect();
    let hay_lower: Vec<char> = haystack
        .chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect();
    let pat: Vec<char> = needle
        .chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect();
    if pat.is_empty() || pat.len() > hay.len() {
        return Vec::new();
    }
    let boundary = |i: Option<&char>| i.map_or(true, |c| !c.is_alphanumeric());
    let mut out = Vec::new();
    let mut i = 0;
    while i + pat.len() <= hay.len() {
        if hay_lower[i..i + pat.len()] == pat[..]
            && boundary(if i == 0 { None } else { hay.get(i - 1) })
            && boundary(hay.get(i + pat.len()))
        {
            out.push((i, i + pat.len(), hay[i..i + pat.len()].iter().collect()));
            i += pat.len();
        } else {
            i += 1;
        }
    }
    out
}

fn first_ci(haystack: &str, needle: &str) -> Option<(usize, usize, String)> {
    find_all_ci(haystack, needle).into_iter().next()
}

/// Lexicon-based annotator: entities and noun phrases are looked up from
/// fixed phrase tables; dependency parses come from a per-text table.
pub struct MockAnnotator {
    entities: Vec<(String, String)>,
    noun_phrases: Vec<String>,
    parses: HashMap<String, Vec<TokenParse>>,
}

impl MockAnnotator {
    pub fn new() -> Self {
        MockAnnotator {
            entities: Vec::new(),
            noun_phrases: Vec::new(),
            parses: HashMap::new(),
        }
    }

    pub fn with_default_lexicon() -> Self {
        let mut m = Self::new();
        m.add_entity("Madonna", "PERSON");
        m.add_entity("New York City", "GPE");
        m.add_entity("Michigan", "GPE");
        m.add_entity("Los Angeles", "GPE");
        m.add_entity("Red Hot Chili Peppers", "ORG");
        m.add_entity("Sephora", "ORG");
        m.add_entity("1854", "DATE");
        m.add_entity("1968", "DATE");
        m.add_noun_phrase("coffee");
        m.add_noun_phrase("vulnerable species");
        m.add_noun_phrase("the giant panda");
        m.add_noun_phrase("cats");
        m.add_noun_phrase("stimulating effects");
        m
    }

    pub fn add_entity(&mut self, phrase: &str, label: &str) -> &mut Self {
        self.entities.push((phrase.to_string(), label.to_string()));
        self
    }

    pub fn add_noun_phrase(&mut self, phrase: &str) -> &mut Self {
        self.noun_phrases.push(phrase.to_string());
        self
    }

    pub fn add_parse(&mut self, text: &str, parse: Vec<TokenParse>) -> &mut Self {
        self.parses.insert(text.to_string(), parse);
        self
    }
}

impl Default for MockAnnotator {
    fn default() -> Self {
        Self::with_default_lexicon()
    }
}

impl Annotator for MockAnnotator {
    fn annotate(&self, text: &str) -> Result<AnnotationResult> {
        require_nonempty(text, "annotation text")?;
        let mut entities = Vec::new();
        for (phrase, label) in &self.entities {
            for (start, end, matched) in find_all_ci(text, phrase) {
                entities.push(EntitySpan {
                    text: matched,
                    start,
                    end,
                    label: label.clone(),
                });
            }
        }
        let mut noun_phrases = Vec::new();
        for phrase in &self.noun_phrases {
            for (start, end, matched) in find_all_ci(text, phrase) {
                noun_phrases.push(PhraseSpan {
                    text: matched,
                    start,
                    end,
                });
            }
        }
        entities.sort_by_key(|e| (e.start, e.end));
        noun_phrases.sort_by_key(|p| (p.start, p.end));
        let result = AnnotationResult {
            entities,
            noun_phrases,
            parses: self.parses.get(text).cloned(),
        };
        result.validate(text)?;
        Ok(result)
    }
}

struct QgRule {
    span: String,
    question: String,
}

/// Template question generator. Explicit per-span rules take priority; when
/// none apply, a copula rewrite of the sentence containing the span is
/// synthesized ("coffee is very acidic" -> "What is very acidic?").
pub struct TemplateQg {
    rules: Vec<QgRule>,
}

impl TemplateQg {
    pub fn new() -> Self {
        TemplateQg { rules: Vec::new() }
    }

    pub fn with_default_rules() -> Self {
        let mut qg = Self::new();
        qg.add_rule("Los Angeles", "Where were the Red Hot Chili Peppers formed?");
        qg.add_rule("LA", "Where were the Red Hot Chili Peppers formed?");
        qg.add_rule("cats", "What do I love?");
        qg
    }

    pub fn add_rule(&mut self, span: &str, question: &str) -> &mut Self {
        self.rules.push(QgRule {
            span: lower(span),
            question: question.to_string(),
        });
        self
    }
}

impl Default for TemplateQg {
    fn default() -> Self {
        Self::with_default_rules()
    }
}

fn sentence_containing(context: &str, span: &str) -> Option<String> {
    for raw in context.split_inclusive(['.', '!', '?']) {
        let sent = raw.trim().trim_end_matches(['.', '!', '?']).trim();
        if !sent.is_empty() && first_ci(sent, span).is_some() {
            return Some(sent.to_string());
        }
    }
    None
}

const COPULAS: [&str; 4] = ["is", "are", "was", "were"];

/// Rewrites the sentence around `span` into a "What <copula> ...?" question.
fn template_question(span: &str, context: &str) -> Option<String> {
    let sentence = sentence_containing(context, span)?;
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let span_words: Vec<String> = span.split_whitespace().map(lower).collect();
    let lowered: Vec<String> = words.iter().map(|w| lower(w)).collect();

    let span_at = (0..words.len()).find(|&i| {
        i + span_words.len() <= words.len() && lowered[i..i + span_words.len()] == span_words[..]
    })?;
    let span_end = span_at + span_words.len();
    let cop_at = (0..words.len())
        .find(|&i| !(span_at..span_end).contains(&i) && COPULAS.contains(&lowered[i].as_str()))?;
    let cop = lowered[cop_at].clone();

    if span_end <= cop_at {
        // span precedes the copula: ask about everything after it
        let rest = words[cop_at + 1..].join(" ");
        if rest.is_empty() {
            return None;
        }
        Some(format!("What {cop} {rest}?"))
    } else if span_at > cop_at && span_end == words.len() && cop_at >= 1 {
        // span ends the sentence: keep the subject and the gap words
        let subject = words[cop_at - 1];
        let between = words[cop_at + 1..span_at].join(" ");
        if between.is_empty() {
            Some(format!("What {cop} {subject}?"))
        } else {
            Some(format!("What {cop} {subject} {between}?"))
        }
    } else {
        None
    }
}

impl QuestionGenerator for TemplateQg {
    fn generate(
        &self,
        span: &str,
        context: &str,
        beam_size: usize,
        top_n: usize,
    ) -> Result<QgResult> {
        require_nonempty(span, "span")?;
        require_nonempty(context, "context")?;
        if top_n < 1 || beam_size < top_n {
            return Err(Q2Error::Precondition(format!(
                "need beam_size >= top_n >= 1, got beam_size {beam_size}, top_n {top_n}"
            )));
        }
        if first_ci(context, span).is_none() {
            return Err(Q2Error::Precondition(format!(
                "span `{span}` does not occur in context"
            )));
        }
        let mut texts: Vec<String> = Vec::new();
        if let Some(q) = template_question(span, context) {
            texts.push(q);
        }
        let span_lower = lower(span);
        for rule in &self.rules {
            if rule.span == span_lower && !texts.contains(&rule.question) {
                texts.push(rule.question.clone());
            }
        }
        texts.truncate(top_n);
        let n = texts.len();
        let questions = texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| GeneratedQuestion {
                text,
                score: (n - i) as f64 / n.max(1) as f64,
            })
            .collect();
        let result = QgResult { questions };
        result.validate(top_n)?;
        Ok(result)
    }
}

struct QaRule {
    question: String,
    candidates: Vec<String>,
}

/// Substring-match extractive QA. An explicit answer table is consulted
/// first (candidates tried in order, the first one present in the context
/// wins); then a copula-inversion of "What is ...?" questions; otherwise
/// no-answer with confidence 0.
pub struct SubstringQa {
    table: Vec<QaRule>,
}

impl SubstringQa {
    pub fn new() -> Self {
        SubstringQa { table: Vec::new() }
    }

    pub fn with_default_table() -> Self {
        let mut qa = Self::new();
        qa.add_rule(
            "What are they reliant on?",
            &["conservation", "vulnerable species"],
        );
        qa.add_rule(
            "Where were the Red Hot Chili Peppers formed?",
            &["Los Angeles", "LA"],
        );
        qa.add_rule("What do I love?", &["cats"]);
        qa
    }

    pub fn add_rule(&mut self, question: &str, candidates: &[&str]) -> &mut Self {
        self.table.push(QaRule {
            question: lower(question),
            candidates: candidates.iter().map(|c| c.to_string()).collect(),
        });
        self
    }
}

impl Default for SubstringQa {
    fn default() -> Self {
        Self::with_default_table()
    }
}

/// Inverts "What <copula> REST?" against the context: if "<copula> REST"
/// occurs, the answer is the phrase preceding it in its sentence.
fn invert_template(question: &str, context: &str) -> Option<AnswerSpan> {
    let q = question.trim().trim_end_matches('?');
    let mut words = q.split_whitespace();
    if lower(words.next()?) != "what" {
        return None;
    }
    let cop = lower(words.next()?);
    if !COPULAS.contains(&cop.as_str()) {
        return None;
    }
    let rest: Vec<&str> = words.collect();
    if rest.is_empty() {
        return None;
    }
    let pattern = format!("{cop} {}", rest.join(" "));
    let (pat_start, _, _) = first_ci(context, &pattern)?;
    // answer = tokens from the start of the sentence up to the pattern
    let chars: Vec<char> = context.chars().collect();
    let sent_start = (0..pat_start)
        .rev()
        .find(|&i| matches!(chars[i], '.' | '!' | '?'))
        .map(|i| i + 1)
        .unwrap_or(0);
    let mut start = sent_start;
    while start < pat_start && chars[start].is_whitespace() {
        start += 1;
    }
    let mut end = pat_start;
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if end <= start {
        return None;
    }
    Some(AnswerSpan {
        text: chars[start..end].iter().collect(),
        start,
        end,
    })
}

impl QuestionAnswerer for SubstringQa {
    fn answer(&self, question: &str, context: &str) -> Result<QaResult> {
        require_nonempty(question, "question")?;
        require_nonempty(context, "context")?;
        let q = lower(question.trim());
        for rule in &self.table {
            if rule.question == q {
                for candidate in &rule.candidates {
                    if let Some((start, end, text)) = first_ci(context, candidate) {
                        let result = QaResult {
                            answer: Some(AnswerSpan { text, start, end }),
                            confidence: 1.0,
                        };
                        result.validate(context)?;
                        return Ok(result);
                    }
                }
                return Ok(QaResult::no_answer());
            }
        }
        if let Some(span) = invert_template(question, context) {
            let result = QaResult {
                answer: Some(span),
                confidence: 1.0,
            };
            result.validate(context)?;
            return Ok(result);
        }
        Ok(QaResult::no_answer())
    }
}

/// Rule-table NLI with reflexive entailment and a configurable default.
pub struct RuleNli {
    rules: HashMap<(String, String), NliLabel>,
    default_label: NliLabel,
}

impl RuleNli {
    pub fn new(default_label: NliLabel) -> Self {
        RuleNli {
            rules: HashMap::new(),
            default_label,
        }
    }

    pub fn with_default_rules() -> Self {
        let mut nli = Self::new(NliLabel::Neutral);
        nli.add_rule(
            "Where were the Red Hot Chili Peppers formed? Los Angeles",
            "Where were the Red Hot Chili Peppers formed? LA",
            NliLabel::Entailment,
        );
        nli.add_rule(
            "I have a dog",
            "I do not have a dog",
            NliLabel::Contradiction,
        );
        nli
    }

    pub fn add_rule(&mut self, premise: &str, hypothesis: &str, label: NliLabel) -> &mut Self {
        self.rules
            .insert((lower(premise.trim()), lower(hypothesis.trim())), label);
        self
    }
}

impl Default for RuleNli {
    fn default() -> Self {
        Self::with_default_rules()
    }
}

impl NliClassifier for RuleNli {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        require_nonempty(premise, "premise")?;
        require_nonempty(hypothesis, "hypothesis")?;
        let p = lower(premise.trim());
        let h = lower(hypothesis.trim());
        let label = if p == h {
            NliLabel::Entailment
        } else {
            self.rules
                .get(&(p, h))
                .copied()
                .unwrap_or(self.default_label)
        };
        let verdict = NliVerdict::for_label(label, 0.8);
        verdict.validate()?;
        Ok(verdict)
    }
}

/// Mock scorer: 1 on string equality, a fixed value otherwise.
pub struct EqualityBertScorer {
    pub mismatch_value: f64,
}

impl Default for EqualityBertScorer {
    fn default() -> Self {
        EqualityBertScorer {
            mismatch_value: 0.5,
        }
    }
}

impl BertScorer for EqualityBertScorer {
    fn score(&self, candidate: &str, reference: &str) -> Result<f64> {
        Ok(if candidate == reference {
            1.0
        } else {
            self.mismatch_value
        })
    }
}
