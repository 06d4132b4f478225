//! Record/replay cache for backend calls. Every request is keyed by a
//! stable digest of the capability name plus the canonicalized JSON body,
//! making a full evaluation run replayable byte-for-byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{
    AnnotateRequest, AnnotationResult, Annotator, AnswerRequest, Backends, BertScoreRequest,
    BertScoreResponse, BertScorer, GenerateRequest, NliClassifier, NliRequest, NliVerdict,
    QaResult, QgResult, QuestionAnswerer, QuestionGenerator,
};
use crate::error::{Q2Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptMode {
    Record,
    Replay,
    Passthrough,
}

impl std::str::FromStr for TranscriptMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "record" => Ok(TranscriptMode::Record),
            "replay" => Ok(TranscriptMode::Replay),
            "passthrough" => Ok(TranscriptMode::Passthrough),
            other => Err(format!("unknown transcript mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TranscriptLine {
    hash: String,
    capability: String,
    request: Value,
    response: Value,
}

/// Canonical JSON: sorted keys (serde_json maps are ordered), compact
/// separators, so syntactically different but equal bodies hash alike.
pub fn canonical_json(value: &Value) -> String {
    serde_json::to_string(value).expect("JSON value serializes")
}

pub fn request_hash(capability: &str, request: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(capability.as_bytes());
    hasher.update(b"\n");
    hasher.update(canonical_json(request).as_bytes());
    hex::encode(hasher.finalize())
}

pub struct Transcript {
    mode: TranscriptMode,
    entries: Mutex<BTreeMap<String, TranscriptLine>>,
}

impl Transcript {
    pub fn new(mode: TranscriptMode) -> Self {
        Transcript {
            mode,
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn mode(&self) -> TranscriptMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: impl AsRef<Path>, mode: TranscriptMode) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
        let mut entries = BTreeMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Q2Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptLine = serde_json::from_str(&line).map_err(|e| Q2Error::Parse {
                line: idx + 1,
                message: format!("transcript: {e}"),
            })?;
            entries.insert(entry.hash.clone(), entry);
        }
        Ok(Transcript {
            mode,
            entries: Mutex::new(entries),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file =
            File::create(path).map_err(|e| Q2Error::io(path.display().to_string(), e))?;
        let entries = self.entries.lock().unwrap();
        for entry in entries.values() {
            let line = serde_json::to_string(entry).expect("transcript entry serializes");
            writeln!(file, "{line}").map_err(|e| Q2Error::io(path.display().to_string(), e))?;
        }
        Ok(())
    }

    /// Routes one backend call through the cache. In record mode the live
    /// response is stored under the request hash; in replay mode a miss is
    /// an error, never a silent live call.
    pub fn with_transcript<F>(&self, capability: &str, request: &Value, live: F) -> Result<Value>
    where
        F: FnOnce() -> Result<Value>,
    {
        let hash = request_hash(capability, request);
        match self.mode {
            TranscriptMode::Passthrough => live(),
            TranscriptMode::Replay => {
                let entries = self.entries.lock().unwrap();
                entries
                    .get(&hash)
                    .map(|e| e.response.clone())
                    .ok_or_else(|| Q2Error::CacheMiss {
                        capability: capability.to_string(),
                        hash,
                    })
            }
            TranscriptMode::Record => {
                {
                    let entries = self.entries.lock().unwrap();
                    if let Some(entry) = entries.get(&hash) {
                        return Ok(entry.response.clone());
                    }
                }
                let response = live()?;
                let mut entries = self.entries.lock().unwrap();
                let entry = entries.entry(hash.clone()).or_insert(TranscriptLine {
                    hash,
                    capability: capability.to_string(),
                    request: request.clone(),
                    response,
                });
                Ok(entry.response.clone())
            }
        }
    }
}

fn to_value<T: Serialize>(capability: &str, v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Q2Error::Protocol {
        capability: capability.to_string(),
        message: e.to_string(),
    })
}

fn from_value<T: for<'de> Deserialize<'de>>(capability: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Q2Error::Protocol {
        capability: capability.to_string(),
        message: format!("malformed cached response: {e}"),
    })
}

fn need_inner<'a, T: ?Sized>(inner: &'a Option<Arc<T>>, capability: &str) -> Result<&'a Arc<T>> {
    inner.as_ref().ok_or_else(|| Q2Error::Transport {
        capability: capability.to_string(),
        message: "no live backend configured (replay-only)".into(),
    })
}

pub struct TranscribedAnnotator {
    inner: Option<Arc<dyn Annotator>>,
    transcript: Arc<Transcript>,
}

impl Annotator for TranscribedAnnotator {
    fn annotate(&self, text: &str) -> Result<AnnotationResult> {
        let request = to_value(
            "annotate",
            &AnnotateRequest {
                text: text.to_string(),
            },
        )?;
        let response = self.transcript.with_transcript("annotate", &request, || {
            let result = need_inner(&self.inner, "annotate")?.annotate(text)?;
            to_value("annotate", &result)
        })?;
        let result: AnnotationResult = from_value("annotate", response)?;
        result.validate(text)?;
        Ok(result)
    }
}

pub struct TranscribedQg {
    inner: Option<Arc<dyn QuestionGenerator>>,
    transcript: Arc<Transcript>,
}

impl QuestionGenerator for TranscribedQg {
    fn generate(
        &self,
        span: &str,
        context: &str,
        beam_size: usize,
        top_n: usize,
    ) -> Result<QgResult> {
        let request = to_value(
            "generate",
            &GenerateRequest {
                span: span.to_string(),
                context: context.to_string(),
                beam_size,
                top_n,
            },
        )?;
        let response = self.transcript.with_transcript("generate", &request, || {
            let result = need_inner(&self.inner, "generate")?
                .generate(span, context, beam_size, top_n)?;
            to_value("generate", &result)
        })?;
        let result: QgResult = from_value("generate", response)?;
        result.validate(top_n)?;
        Ok(result)
    }
}

pub struct TranscribedQa {
    inner: Option<Arc<dyn QuestionAnswerer>>,
    transcript: Arc<Transcript>,
}

impl QuestionAnswerer for TranscribedQa {
    fn answer(&self, question: &str, context: &str) -> Result<QaResult> {
        let request = to_value(
            "answer",
            &AnswerRequest {
                question: question.to_string(),
                context: context.to_string(),
            },
        )?;
        let response = self.transcript.with_transcript("answer", &request, || {
            let result = need_inner(&self.inner, "answer")?.answer(question, context)?;
            to_value("answer", &result)
        })?;
        let result: QaResult = from_value("answer", response)?;
        result.validate(context)?;
        Ok(result)
    }
}

pub struct TranscribedNli {
    inner: Option<Arc<dyn NliClassifier>>,
    transcript: Arc<Transcript>,
}

impl NliClassifier for TranscribedNli {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        let request = to_value(
            "nli",
            &NliRequest {
                premise: premise.to_string(),
                hypothesis: hypothesis.to_string(),
            },
        )?;
        let response = self.transcript.with_transcript("nli", &request, || {
            let result = need_inner(&self.inner, "nli")?.classify(premise, hypothesis)?;
            to_value("nli", &result)
        })?;
        let verdict: NliVerdict = from_value("nli", response)?;
        verdict.validate()?;
        Ok(verdict)
    }
}

pub struct TranscribedBertScorer {
    inner: Option<Arc<dyn BertScorer>>,
    transcript: Arc<Transcript>,
}

impl BertScorer for TranscribedBertScorer {
    fn score(&self, candidate: &str, reference: &str) -> Result<f64> {
        let request = to_value(
            "bertscore",
            &BertScoreRequest {
                candidate: candidate.to_string(),
                reference: reference.to_string(),
            },
        )?;
        let response = self.transcript.with_transcript("bertscore", &request, || {
            let f1 = need_inner(&self.inner, "bertscore")?.score(candidate, reference)?;
            to_value("bertscore", &BertScoreResponse { f1 })
        })?;
        let result: BertScoreResponse = from_value("bertscore", response)?;
        Ok(result.f1)
    }
}

impl Backends {
    /// Wraps every capability in the transcript cache.
    pub fn with_transcript(self, transcript: Arc<Transcript>) -> Backends {
        Backends {
            annotator: Arc::new(TranscribedAnnotator {
                inner: Some(self.annotator),
                transcript: Arc::clone(&transcript),
            }),
            qg: Arc::new(TranscribedQg {
                inner: Some(self.qg),
                transcript: Arc::clone(&transcript),
            }),
            qa: Arc::new(TranscribedQa {
                inner: Some(self.qa),
                transcript: Arc::clone(&transcript),
            }),
            nli: Arc::new(TranscribedNli {
                inner: Some(self.nli),
                transcript: Arc::clone(&transcript),
            }),
            bertscore: self.bertscore.map(|b| {
                Arc::new(TranscribedBertScorer {
                    inner: Some(b),
                    transcript,
                }) as Arc<dyn BertScorer>
            }),
        }
    }

    /// Backends that answer solely from a replay transcript.
    pub fn replay_only(transcript: Arc<Transcript>) -> Backends {
        Backends {
            annotator: Arc::new(TranscribedAnnotator {
                inner: None,
                transcript: Arc::clone(&transcript),
            }),
            qg: Arc::new(TranscribedQg {
                inner: None,
                transcript: Arc::clone(&transcript),
            }),
            qa: Arc::new(TranscribedQa {
                inner: None,
                transcript: Arc::clone(&transcript),
            }),
            nli: Arc::new(TranscribedNli {
                inner: None,
                transcript: Arc::clone(&transcript),
            }),
            bertscore: Some(Arc::new(TranscribedBertScorer {
                inner: None,
                transcript,
            })),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn record_then_replay_is_byte_identical() {
        let t = Transcript::new(TranscriptMode::Record);
        let req = json!({"text": "coffee"});
        let recorded = t
            .with_transcript("annotate", &req, || Ok(json!({"entities": []})))
            .unwrap();
        let replayed = t
            .with_transcript("annotate", &req, || panic!("must not call live"))
            .unwrap();
        assert_eq!(
            canonical_json(&recorded),
            canonical_json(&replayed)
        );
    }

    #[test]
    fn replay_miss_is_explicit_error() {
        let t = Transcript::new(TranscriptMode::Replay);
        let err = t
            .with_transcript("nli", &json!({"premise": "p"}), || unreachable!())
            .unwrap_err();
        match err {
            Q2Error::CacheMiss { capability, hash } => {
                assert_eq!(capability, "nli");
                assert_eq!(hash.len(), 64);
            }
            other => panic!("expected cache miss, got {other}"),
        }
    }

    #[test]
    fn canonically_equal_bodies_hash_alike() {
        // same object, different key order and whitespace at the source level
        let a: Value = serde_json::from_str(r#"{ "b": 1,   "a": "x y" }"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a":"x y","b":1}"#).unwrap();
        assert_eq!(request_hash("cap", &a), request_hash("cap", &b));
        // different capability, different hash
        assert_ne!(request_hash("cap", &a), request_hash("other", &a));
    }

    #[test]
    fn transcript_file_roundtrip() {
        let t = Transcript::new(TranscriptMode::Record);
        t.with_transcript("answer", &json!({"question": "q", "context": "c"}), || {
            Ok(json!({"answer": null, "confidence": 0.0}))
        })
        .unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        t.save(file.path()).unwrap();
        let t2 = Transcript::load(file.path(), TranscriptMode::Replay).unwrap();
        assert_eq!(t2.len(), 1);
        let replayed = t2
            .with_transcript("answer", &json!({"question": "q", "context": "c"}), || {
                unreachable!()
            })
            .unwrap();
        assert_eq!(replayed, json!({"answer": null, "confidence": 0.0}));
    }
}
