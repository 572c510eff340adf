use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate tail: all {n} tail values equal {value}")]
    DegenerateTail { n: usize, value: f64 },

    #[error("invalid tail size {0}: must be at least 2")]
    InvalidTailSize(usize),

    #[error("invalid distance {value} at index {index}: distances must be finite and non-negative")]
    InvalidDistance { index: usize, value: f64 },

    #[error("shape root-solve did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid Weibull parameters: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, found {found}{}", line_suffix(*.line))]
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid label {label} at line {line}: labels are -1 (unknown) or a class index")]
    InvalidLabel { line: usize, label: i64 },

    #[error("class {0} has no contributing training records")]
    EmptyClass(i64),

    #[error("class {class_id}: {source}")]
    ClassFit {
        class_id: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("record {0} has no predicted_label")]
    MissingPrediction(String),

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("empty input")]
    EmptyInput,

    #[error("no {0} samples among the truths")]
    EmptySubset(&'static str),

    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn with_class(self, class_id: i64) -> Self {
        match self {
            e @ (Error::EmptyClass(_) | Error::ClassFit { .. }) => e,
            e => Error::ClassFit {
                class_id,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            expected,
            found,
            line: None,
        }
    }
}
