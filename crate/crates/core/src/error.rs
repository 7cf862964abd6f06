use std::fmt;

/// A single failing record found while validating a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RecordIssue {
    /// 1-based line number in the source file.
    pub line: usize,
    pub id: Option<String>,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for RecordIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} ({}): {}: {}", self.line, id, self.field, self.message),
            None => write!(f, "line {}: {}: {}", self.line, self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("{} invalid record(s); first: {}", .0.len(), .0[0])]
    Validation(Vec<RecordIssue>),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("source and target are identical; there is no edit")]
    NoEdit,

    #[error("invalid edit: {0}")]
    InvalidEdit(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("parser backend error: {0}")]
    Backend(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty span")]
    EmptySpan,

    #[error("no parse for instance {0:?}")]
    MissingParse(String),

    #[error("sequence of length {len} exceeds the encoder limit of {max} positions")]
    Truncation { len: usize, max: usize },

    #[error("predictions and gold are not aligned: {0}")]
    Alignment(String),

    #[error("correlation is undefined for constant input")]
    UndefinedCorrelation,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
