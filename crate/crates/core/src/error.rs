use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while parsing a bag CSV file. Every variant carries the
/// 1-based line number of the offending record.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: missing header (expected first column `task_id`)")]
    MissingHeader { line: u64 },
    #[error("line {line}: malformed header: {reason}")]
    BadHeader { line: u64, reason: String },
    #[error("line {line}: ragged row, expected {expected} fields but found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: non-numeric value {value:?} in column `{column}`")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}: non-finite value in column `{column}`")]
    NonFinite { line: u64, column: String },
    #[error("line {line}: duplicate row {row} for task `{task_id}`")]
    DuplicateRow { line: u64, task_id: String, row: u64 },
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
}

impl ParseError {
    pub fn line(&self) -> u64 {
        match self {
            ParseError::MissingHeader { line }
            | ParseError::BadHeader { line, .. }
            | ParseError::RaggedRow { line, .. }
            | ParseError::NonNumeric { line, .. }
            | ParseError::NonFinite { line, .. }
            | ParseError::DuplicateRow { line, .. }
            | ParseError::Malformed { line, .. } => *line,
        }
    }
}

/// Errors raised while decoding a model file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelFileError {
    #[error("unsupported model format_version {found} (this build reads version {supported})")]
    Version { found: i64, supported: i64 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model file schema violation: {0}")]
    Schema(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty bag `{0}`")]
    EmptyBag(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing labels: {0}")]
    MissingLabels(String),
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn incompatible(msg: impl Into<String>) -> Self {
        Error::Incompatible(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
