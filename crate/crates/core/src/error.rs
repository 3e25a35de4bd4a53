use thiserror::Error;

use crate::coda::Part;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("composition part {part} must be finite and > 0, got {value}")]
    NonPositivePart { part: Part, value: f64 },
    #[error("log-ratio needs two distinct parts, got {0}/{0}")]
    SamePart(Part),
    #[error("part {0} is zero for every record; no positive value to impute from")]
    AllZeroPart(Part),
    #[error("not a spanning log-ratio graph: {0}")]
    Graph(#[from] crate::coda::GraphRejection),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("labels contain a single class ({0}); both classes are required")]
    SingleClass(&'static str),
    #[error("design matrix is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("feature count mismatch: model expects {expected}, got {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in column `{column}` row {row}")]
    NonFinite { column: String, row: usize },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::MissingColumn(_) | Error::Config(_) => ErrorCategory::Config,
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::NonPositivePart { .. }
            | Error::SamePart(_)
            | Error::AllZeroPart(_)
            | Error::Graph(_)
            | Error::InsufficientData(_)
            | Error::SingleClass(_)
            | Error::ColumnMismatch { .. }
            | Error::LengthMismatch(..)
            | Error::NonFinite { .. } => ErrorCategory::Data,
            Error::RankDeficient(_) | Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Context { source, .. } => source.category(),
        }
    }
}
