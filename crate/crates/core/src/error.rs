use std::path::PathBuf;

use thiserror::Error;

/// A single schema or range violation found while validating a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// JSON pointer of the offending value, e.g. `/emulator/C2`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite state at step {step} (t = {t:e} s): {detail}")]
    NonFinite { step: usize, t: f64, detail: String },

    #[error("singular: {0}")]
    Singular(String),

    #[error("insufficient trace length: {0}")]
    InsufficientLength(String),

    #[error("no flux zero crossing found in window")]
    NoCrossing,

    #[error("degenerate signal: {0}")]
    Degenerate(String),

    #[error("source evaluated out of range at t = {0:e} s")]
    OutOfRange(f64),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config schema errors: {}", join_violations(.0))]
    Schema(Vec<Violation>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Process exit code: 1 = config, 2 = numeric, 3 = I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Schema(_) => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
