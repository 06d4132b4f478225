//! Score-report serialization. JSONL is the canonical format and
//! round-trips bit-exactly; CSV flattens one row per question.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Q2Error, Result};
use crate::scoring::{QuestionScore, ResponseScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ReportFormat::Jsonl),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportRecord {
    id: String,
    q2: f64,
    used_fallback: bool,
    questions: Vec<QuestionScore>,
}

impl From<&ResponseScore> for ReportRecord {
    fn from(score: &ResponseScore) -> Self {
        ReportRecord {
            id: score.example_id.clone(),
            q2: score.value,
            used_fallback: score.used_fallback,
            questions: score.question_scores.clone(),
        }
    }
}

impl From<ReportRecord> for ResponseScore {
    fn from(rec: ReportRecord) -> Self {
        let valid_question_count = rec.questions.len();
        ResponseScore {
            example_id: rec.id,
            value: rec.q2,
            used_fallback: rec.used_fallback,
            question_scores: rec.questions,
            valid_question_count,
        }
    }
}

pub fn write_report(
    scores: &[ResponseScore],
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    match format {
        ReportFormat::Jsonl => {
            let mut file =
                File::create(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
            for score in scores {
                let rec = ReportRecord::from(score);
                let line = serde_json::to_string(&rec).expect("report record serializes");
                writeln!(file, "{line}")
                    .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
            }
            Ok(())
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_path(path)
                .map_err(|e| Q2Error::Validation(format!("csv open {}: {e}", path.display())))?;
            writer
                .write_record([
                    "id",
                    "q2",
                    "used_fallback",
                    "question",
                    "span",
                    "response_answer",
                    "knowledge_answer",
                    "verdict",
                    "score",
                ])
                .map_err(|e| Q2Error::Validation(format!("csv write: {e}")))?;
            for score in scores {
                if score.question_scores.is_empty() {
                    writer
                        .write_record([
                            score.example_id.as_str(),
                            &score.value.to_string(),
                            &score.used_fallback.to_string(),
                            "",
                            "",
                            "",
                            "",
                            "",
                            "",
                        ])
                        .map_err(|e| Q2Error::Validation(format!("csv write: {e}")))?;
                }
                for q in &score.question_scores {
                    writer
                        .write_record([
                            score.example_id.as_str(),
                            &score.value.to_string(),
                            &score.used_fallback.to_string(),
                            q.question.as_str(),
                            q.span.as_str(),
                            q.response_answer.as_str(),
                            q.knowledge_answer.as_deref().unwrap_or(""),
                            &serde_json::to_value(q.verdict)
                                .expect("verdict serializes")
                                .as_str()
                                .unwrap()
                                .to_string(),
                            &q.score.to_string(),
                        ])
                        .map_err(|e| Q2Error::Validation(format!("csv write: {e}")))?;
                }
            }
            writer
                .flush()
                .map_err(|e| Q2Error::io(path.display().to_string(), e))
        }
    }
}

/// Reloads a JSONL report; inverse of `write_report` for that format.
pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<ResponseScore>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Q2Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReportRecord = serde_json::from_str(&line).map_err(|e| Q2Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec.into());
    }
    Ok(out)
}
