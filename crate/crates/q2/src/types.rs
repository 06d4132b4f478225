//! Domain types shared across the pipeline, scoring, and meta-evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Q2Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    System,
}

/// One utterance of the dialogue history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Q2Error::Validation(
                "turn text is empty after trimming".into(),
            ));
        }
        Ok(Turn { speaker, text })
    }
}

/// Gold factual-consistency label for a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    Consistent,
    Inconsistent,
}

/// One evaluation unit: dialogue history, grounding knowledge, and the
/// response under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueExample {
    pub id: String,
    #[serde(default)]
    pub history: Vec<Turn>,
    pub knowledge: String,
    pub response: String,
    #[serde(default)]
    pub system_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<GoldLabel>,
    /// Human "Uses Knowledge" rating; present only for topical_usr data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_score: Option<f64>,
    /// Grouping key for probes that permute knowledge within a dialogue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue_id: Option<String>,
}

impl DialogueExample {
    pub fn validate(&self) -> Result<()> {
        if self.knowledge.trim().is_empty() {
            return Err(Q2Error::Validation(format!(
                "example `{}` has empty knowledge",
                self.id
            )));
        }
        if self.response.trim().is_empty() {
            return Err(Q2Error::Validation(format!(
                "example `{}` has empty response",
                self.id
            )));
        }
        for turn in &self.history {
            if turn.text.trim().is_empty() {
                return Err(Q2Error::Validation(format!(
                    "example `{}` has an empty history turn",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    WowAnnotated,
    TopicalUsr,
    Dnli,
    GenericJsonl,
}

impl std::str::FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "wow_annotated" | "wow" => Ok(SourceFormat::WowAnnotated),
            "topical_usr" | "topical" => Ok(SourceFormat::TopicalUsr),
            "dnli" => Ok(SourceFormat::Dnli),
            "generic_jsonl" | "generic" => Ok(SourceFormat::GenericJsonl),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

/// An immutable collection of examples normalized from one of the benchmark
/// formats. Safe to share across parallel scoring workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<DialogueExample>,
    pub source_format: SourceFormat,
}

impl Dataset {
    pub fn new(examples: Vec<DialogueExample>, source_format: SourceFormat) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for ex in &examples {
            ex.validate()?;
            if !seen.insert(ex.id.as_str()) {
                return Err(Q2Error::Validation(format!(
                    "duplicate example id `{}`",
                    ex.id
                )));
            }
        }
        Ok(Dataset {
            examples,
            source_format,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Maps a DNLI label onto the binary consistency scale. Neutral and
/// contradiction both count as inconsistent.
pub fn map_dnli_label(label: &str) -> Result<GoldLabel> {
    match label {
        "entailment" | "positive" => Ok(GoldLabel::Consistent),
        "neutral" | "contradiction" | "negative" => Ok(GoldLabel::Inconsistent),
        other => Err(Q2Error::Validation(format!("unknown dnli label `{other}`"))),
    }
}
