use thiserror::Error;

pub type Result<T> = std::result::Result<T, WaspError>;

/// Coarse grouping used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum WaspError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("encoding error: level `{level}` of `{column}` appears out of sample but not in the sample")]
    Encoding { column: String, level: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("design matrix is rank deficient ({rank} of {columns} columns independent)")]
    RankDeficient { rank: usize, columns: usize },

    #[error("IRLS did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model family `{0}` cannot be used here")]
    Family(String),

    #[error("generation error at row {row}: {message}")]
    Generation { row: usize, message: String },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("strategy `{strategy}` failed: {source}")]
    Strategy {
        strategy: String,
        #[source]
        source: Box<WaspError>,
    },

    #[error("generator `{generator}` could not be fitted on the sample: {source}")]
    GeneratorFit {
        generator: String,
        #[source]
        source: Box<WaspError>,
    },

    #[error("generator `{generator}` / strategy `{strategy}` kept {effective} iterations, at least 2 are required")]
    Assembly {
        generator: String,
        strategy: String,
        effective: usize,
    },

    #[error("strategy fit failure rate {rate:.4} exceeds the ceiling {ceiling:.4}")]
    FailureCeiling { rate: f64, ceiling: f64 },

    #[error("expected a {expected} voting matrix, got {actual}")]
    Transform { expected: String, actual: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl WaspError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            WaspError::Config(_) | WaspError::GeneratorFit { .. } | WaspError::Family(_) => {
                ErrorCategory::Config
            }
            WaspError::Schema(_)
            | WaspError::Parse { .. }
            | WaspError::Encoding { .. }
            | WaspError::Shape { .. }
            | WaspError::Domain(_)
            | WaspError::Transform { .. }
            | WaspError::Io(_)
            | WaspError::Csv(_) => ErrorCategory::Data,
            WaspError::RankDeficient { .. }
            | WaspError::Convergence { .. }
            | WaspError::Generation { .. }
            | WaspError::Degenerate(_)
            | WaspError::Strategy { .. }
            | WaspError::Assembly { .. }
            | WaspError::FailureCeiling { .. } => ErrorCategory::Runtime,
        }
    }
}
