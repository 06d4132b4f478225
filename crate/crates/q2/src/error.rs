use thiserror::Error;

#[derive(Debug, Error)]
pub enum Q2Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error at line {line}: missing or invalid field `{field}`")]
    Schema { line: usize, field: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("transport error for capability `{capability}`: {message}")]
    Transport {
        capability: String,
        message: String,
    },

    #[error("protocol error for capability `{capability}`: {message}")]
    Protocol {
        capability: String,
        message: String,
    },

    #[error("transcript replay miss for capability `{capability}` (request hash {hash})")]
    CacheMiss { capability: String, hash: String },

    #[error("scoring example `{example_id}` failed: {source}")]
    Example {
        example_id: String,
        #[source]
        source: Box<Q2Error>,
    },
}

impl Q2Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Q2Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn with_example(self, id: &str) -> Self {
        Q2Error::Example {
            example_id: id.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Q2Error>;
