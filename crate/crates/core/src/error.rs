use std::path::PathBuf;

use thiserror::Error;

use crate::series::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series must contain at least one value")]
    EmptySeries,
    #[error("non-finite value {value} at year {year}")]
    NonFinite { year: i32, value: f64 },
    #[error("year {year} outside series range {start}..={end}")]
    YearOutOfRange { year: i32, start: i32, end: i32 },
    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: Unit, right: Unit },
    #[error("series year ranges do not overlap")]
    EmptyIntersection,
    #[error("invalid anchors: {0}")]
    InvalidAnchors(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("history too short: {got} observations, need at least {need}")]
    HistoryTooShort { got: usize, need: usize },
    #[error("missing sector `{0}` in history")]
    MissingSector(String),
    #[error("{}", format_schema_errors(.0))]
    Schema(Vec<SchemaError>),
    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

/// One schema violation located in an input file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SchemaError {
    /// 1-based line number, header is line 1; 0 for file-level problems.
    pub line: usize,
    pub column: Option<String>,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.column, self.line) {
            (Some(c), 0) => write!(f, "column `{}`: {}", c, self.message),
            (None, 0) => f.write_str(&self.message),
            (Some(c), line) => write!(f, "line {}, column `{}`: {}", line, c, self.message),
            (None, line) => write!(f, "line {}: {}", line, self.message),
        }
    }
}

fn format_schema_errors(errs: &[SchemaError]) -> String {
    let mut out = format!("{} schema error(s)", errs.len());
    for e in errs {
        out.push_str("\n  ");
        out.push_str(&e.to_string());
    }
    out
}
