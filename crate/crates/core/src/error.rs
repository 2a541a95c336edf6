//! Error type shared across the toolkit.
//!
//! Variants are grouped by how the CLI reports them: usage problems exit
//! with 1, data/coverage problems with 2, numerical failures with 3.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("encoder count {0} out of supported range 1..=16")]
    EncoderCountOutOfRange(usize),

    #[error("encoder index {index} out of range for {n} encoders")]
    EncoderIndexOutOfRange { index: usize, n: usize },

    #[error("encoder {index} is not active in subset {bits:#b}")]
    EncoderNotActive { index: usize, bits: u32 },

    #[error("unknown encoder name '{0}'")]
    UnknownEncoder(String),

    #[error("{path}:{line}: malformed row: {msg}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate entry for subset {subset} / benchmark '{benchmark}'")]
    DuplicateEntry { subset: String, benchmark: String },

    #[error("score file {0} contains no data rows")]
    EmptyFile(PathBuf),

    #[error("benchmark '{0}' is not mapped to any category")]
    UnmappedBenchmark(String),

    #[error("benchmark '{0}' is assigned to two categories")]
    BenchmarkInTwoCategories(String),

    #[error("non-positive divisor {divisor} for benchmark '{benchmark}'")]
    NonPositiveDivisor { benchmark: String, divisor: f64 },

    #[error("unknown category '{0}'")]
    UnknownCategory(String),

    #[error("score {0} is not finite")]
    NonFiniteScore(f64),

    #[error("CUR undefined: reference score {0} is not positive")]
    UndefinedCur(f64),

    #[error("CUR over an empty list is undefined")]
    EmptyCurList,

    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Usage(_) | Config(_) => 1,
            Divergence { .. } | GradCheck(_) | UndefinedCur(_) | NonFiniteScore(_) => 3,
            _ => 2,
        }
    }
}
