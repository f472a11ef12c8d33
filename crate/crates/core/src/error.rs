use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A site, model or generator parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Timestamps are not strictly increasing.
    #[error("timestamps not strictly increasing at index {index}")]
    NonMonotonicTimestamps { index: usize },

    /// Timestamps increase but are not spaced by exactly one hour.
    #[error("timestamp step at index {index} is not one hour (gaps must be explicit missing rows)")]
    NonHourlyStep { index: usize },

    /// Two series that must share timestamps do not.
    #[error("series are misaligned: {0}")]
    MisalignedSeries(String),

    /// A train or test partition holds no valid sample.
    #[error("{side} partition contains no valid samples")]
    EmptyPartition { side: &'static str },

    /// A train/test split configuration violates ordering or span rules.
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("insufficient data: need at least {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("insufficient history: need {needed} lagged values, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    /// Inner least-squares loop exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("all {attempted} candidate fits failed")]
    AllFitsFailed { attempted: usize },

    #[error("expected {expected} member forecasts, got {got}")]
    MemberCountMismatch { expected: usize, got: usize },

    #[error("BIC convention mismatch: expected `{expected}`, found `{found}`")]
    ConventionMismatch { expected: String, found: String },

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("normalization mean must be positive, got {0}")]
    ZeroNormalization(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model document error: {0}")]
    Document(String),

    /// An error raised while processing a named file.
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<Error> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>, e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::InFile { .. } => e,
            e => Error::InFile { path: path.into(), source: Box::new(e) },
        }
    }

    /// Process exit status for the command-line tool: 1 usage/config,
    /// 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InFile { source, .. } => source.exit_code(),
            Error::InvalidParameter(_)
            | Error::InvalidSplit(_)
            | Error::Config(_)
            | Error::MemberCountMismatch { .. } => 1,
            Error::NonConvergence { .. } | Error::NumericalFailure(_) | Error::AllFitsFailed { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
