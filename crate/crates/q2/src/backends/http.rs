//! JSON-over-HTTP client: one POST endpoint per capability, same bodies as
//! the transcript cache, so remote models are pure configuration.

use std::sync::Arc;
use std::time::Duration;

use serde::{de::DeserializeOwned, Serialize};

use super::{
    AnnotateRequest, AnnotationResult, Annotator, AnswerRequest, Backends, BertScoreRequest,
    BertScoreResponse, BertScorer, GenerateRequest, NliClassifier, NliRequest, NliVerdict,
    QaResult, QgResult, QuestionAnswerer, QuestionGenerator, require_nonempty,
};
use crate::error::{Q2Error, Result};

#[derive(Clone)]
pub struct HttpClient {
    client: reqwest::blocking::Client,
    base_url: String,
}

impl HttpClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .expect("http client builds");
        HttpClient {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
        }
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        capability: &str,
        request: &Req,
    ) -> Result<Resp> {
        let url = format!("{}/{capability}", self.base_url);
        let response = self
            .client
            .post(&url)
            .json(request)
            .send()
            .map_err(|e| Q2Error::Transport {
                capability: capability.to_string(),
                message: e.to_string(),
            })?;
        if !response.status().is_success() {
            return Err(Q2Error::Protocol {
                capability: capability.to_string(),
                message: format!("backend returned status {}", response.status()),
            });
        }
        response.json().map_err(|e| Q2Error::Protocol {
            capability: capability.to_string(),
            message: format!("malformed backend reply: {e}"),
        })
    }

    /// A backend bundle with every capability served by this endpoint.
    pub fn into_backends(self, with_bertscore: bool) -> Backends {
        let shared = Arc::new(self);
        Backends {
            annotator: Arc::clone(&shared) as Arc<dyn Annotator>,
            qg: Arc::clone(&shared) as Arc<dyn QuestionGenerator>,
            qa: Arc::clone(&shared) as Arc<dyn QuestionAnswerer>,
            nli: Arc::clone(&shared) as Arc<dyn NliClassifier>,
            bertscore: if with_bertscore {
                Some(shared as Arc<dyn BertScorer>)
            } else {
                None
            },
        }
    }
}

impl Annotator for HttpClient {
    fn annotate(&self, text: &str) -> Result<AnnotationResult> {
        require_nonempty(text, "annotation text")?;
        let result: AnnotationResult = self.post(
            "annotate",
            &AnnotateRequest {
                text: text.to_string(),
            },
        )?;
        result.validate(text)?;
        Ok(result)
    }
}

impl QuestionGenerator for HttpClient {
    fn generate(
        &self,
        span: &str,
        context: &str,
        beam_size: usize,
        top_n: usize,
    ) -> Result<QgResult> {
        require_nonempty(span, "span")?;
        require_nonempty(context, "context")?;
        let result: QgResult = self.post(
            "generate",
            &GenerateRequest {
                span: span.to_string(),
                context: context.to_string(),
                beam_size,
                top_n,
            },
        )?;
        result.validate(top_n)?;
        Ok(result)
    }
}

impl QuestionAnswerer for HttpClient {
    fn answer(&self, question: &str, context: &str) -> Result<QaResult> {
        require_nonempty(question, "question")?;
        require_nonempty(context, "context")?;
        let result: QaResult = self.post(
            "answer",
            &AnswerRequest {
                question: question.to_string(),
                context: context.to_string(),
            },
        )?;
        result.validate(context)?;
        Ok(result)
    }
}

impl NliClassifier for HttpClient {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict> {
        require_nonempty(premise, "premise")?;
        require_nonempty(hypothesis, "hypothesis")?;
        let verdict: NliVerdict = self.post(
            "nli",
            &NliRequest {
                premise: premise.to_string(),
                hypothesis: hypothesis.to_string(),
            },
        )?;
        verdict.validate()?;
        Ok(verdict)
    }
}

impl BertScorer for HttpClient {
    fn score(&self, candidate: &str, reference: &str) -> Result<f64> {
        let response: BertScoreResponse = self.post(
            "bertscore",
            &BertScoreRequest {
                candidate: candidate.to_string(),
                reference: reference.to_string(),
            },
        )?;
        Ok(response.f1)
    }
}
