use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single configuration problem, located by line when the source text is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid physical parameters: {0}")]
    Params(String),

    #[error("potential evaluation failed: {0}")]
    Potential(String),

    #[error("non-finite potential kernel at lattice site (x index {ix}, lambda_p index {ik}): x = {x}, lambda_p = {lambda_p}")]
    NonFiniteKernel {
        ix: usize,
        ik: usize,
        x: f64,
        lambda_p: f64,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("kappa = 0 has no quantum pure state: {0}")]
    ZeroKappa(String),

    #[error("initial state footprint exceeds the grid: {0}")]
    Footprint(String),

    #[error("invalid propagator configuration: {0}")]
    Propagator(String),

    #[error("non-finite field after step {step}")]
    NonFiniteField { step: usize },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("imaginary residue {residue:e} exceeds {limit:e} (relative to max |W|)")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("dense oracle: {0}")]
    Oracle(String),

    #[error("configuration invalid:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("snapshot {path}: {message} (byte offset {offset})")]
    Snapshot {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Coarse failure class, used by the command-line driver for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Runtime,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. } | Error::Snapshot { .. } => ErrorKind::Io,
            Error::AtStep { source, .. } => source.kind(),
            _ => ErrorKind::Runtime,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
