//! Loading of the three benchmark JSONL formats plus a generic passthrough.
//!
//! Every format is normalized into [`DialogueExample`] at load time so the
//! scoring pipeline never branches on the source format. For DNLI pairs the
//! premise is stored in `knowledge` and the hypothesis in `response`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Q2Error, Result};
use crate::types::{map_dnli_label, Dataset, DialogueExample, SourceFormat, Turn};

#[derive(Deserialize)]
struct WowRecord {
    id: String,
    #[serde(default)]
    history: Vec<Turn>,
    knowledge: String,
    response: String,
    #[serde(default)]
    system_id: String,
    #[serde(default)]
    gold_label: Option<crate::types::GoldLabel>,
    #[serde(default)]
    human_score: Option<f64>,
    #[serde(default)]
    dialogue_id: Option<String>,
}

#[derive(Deserialize)]
struct DnliRecord {
    id: String,
    premise: String,
    hypothesis: String,
    label: String,
}

pub fn load_dataset(path: impl AsRef<Path>, format: SourceFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);

    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Q2Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        examples.push(parse_line(&line, line_no, format)?);
    }
    Dataset::new(examples, format)
}

fn parse_line(line: &str, line_no: usize, format: SourceFormat) -> Result<DialogueExample> {
    match format {
        SourceFormat::WowAnnotated | SourceFormat::TopicalUsr | SourceFormat::GenericJsonl => {
            let rec: WowRecord = serde_json::from_str(line).map_err(|e| schema_err(e, line_no))?;
            if format == SourceFormat::TopicalUsr && rec.human_score.is_none() {
                return Err(Q2Error::Schema {
                    line: line_no,
                    field: "human_score".into(),
                });
            }
            Ok(DialogueExample {
                id: rec.id,
                history: rec.history,
                knowledge: rec.knowledge,
                response: rec.response,
                system_id: rec.system_id,
                gold_label: rec.gold_label,
                human_score: rec.human_score,
                dialogue_id: rec.dialogue_id,
            })
        }
        SourceFormat::Dnli => {
            let rec: DnliRecord = serde_json::from_str(line).map_err(|e| schema_err(e, line_no))?;
            let gold = map_dnli_label(&rec.label)?;
            Ok(DialogueExample {
                id: rec.id,
                history: vec![],
                knowledge: rec.premise,
                response: rec.hypothesis,
                system_id: String::new(),
                gold_label: Some(gold),
                human_score: None,
                dialogue_id: None,
            })
        }
    }
}

fn schema_err(e: serde_json::Error, line_no: usize) -> Q2Error {
    let msg = e.to_string();
    // serde_json reports missing fields as "missing field `name`".
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            return Q2Error::Schema {
                line: line_no,
                field: field.to_string(),
            };
        }
    }
    Q2Error::Parse {
        line: line_no,
        message: msg,
    }
}

/// Writes examples in the canonical (wow_annotated-compatible) JSONL form.
pub fn write_dataset(examples: &[DialogueExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    for ex in examples {
        let line = serde_json::to_string(ex).expect("example serializes");
        writeln!(file, "{line}").map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
