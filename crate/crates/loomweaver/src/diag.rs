//! Diagnostics shared by the frontend and later passes.
//!
//! Parsing and validation never panic on user input: they collect
//! [`Diagnostic`]s and let the driver decide how to render them.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A single user-facing message, optionally anchored to a source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    /// 1-based line, when the diagnostic points into the source text.
    pub line: Option<u32>,
    /// 1-based column.
    pub col: Option<u32>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            line: None,
            col: None,
        }
    }

    pub fn warning(message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
            line: None,
            col: None,
        }
    }

    pub fn at(mut self, line: u32, col: u32) -> Self {
        self.line = Some(line);
        self.col = Some(col);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match (self.line, self.col) {
            (Some(l), Some(c)) => write!(f, "{l}:{c}: {kind}: {}", self.message),
            _ => write!(f, "{kind}: {}", self.message),
        }
    }
}

/// Errors raised by compilation stages past the frontend.
///
/// These indicate a directive or transformation that cannot be applied,
/// not a malformed input file.
#[derive(Debug, Error)]
pub enum CompileError {
    #[error("unknown loop dimension `{0}`")]
    UnknownDim(String),
    #[error("dimension name `{0}` is not fresh")]
    DimNotFresh(String),
    #[error("split factor must be >= 2, got {0}")]
    BadSplitFactor(i64),
    #[error("unsupported skew: inner factor must be 1, got {0}")]
    UnsupportedSkew(i64),
    #[error("schedule prefix mismatch between `{0}` and `{1}` at level `{2}`")]
    PrefixMismatch(String, String, String),
    #[error("schedules are not comparable: {0}")]
    NonComparableSchedules(String),
    #[error("unknown compute `{0}`")]
    UnknownCompute(String),
    #[error("unknown array `{0}`")]
    UnknownArray(String),
    #[error("pragma error: {0}")]
    Pragma(String),
    #[error("estimation error: {0}")]
    Estimate(String),
    #[error("interpreter error: {0}")]
    Interp(String),
    #[error("oracle domain too large: {0} points exceeds the cap")]
    OracleDomainTooLarge(u64),
    #[error("emit error: {0}")]
    Emit(String),
}

pub type CompileResult<T> = Result<T, CompileError>;
