use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("unknown identifiers: {}", .0.join(", "))]
    UnknownIdentifiers(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("row {row} is zero after centering and cannot be normalised")]
    ZeroRow { row: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("value {value} at {location} violates bound {bound}")]
    BoundViolation {
        location: String,
        value: f64,
        bound: f64,
    },

    #[error("statistics are already perturbed; releasing them again would spend the budget twice")]
    AlreadyNoisy,

    #[error("posterior precision is singular after repair")]
    SingularPrecision,

    #[error("sampler produced a non-finite state at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("spearman correlation undefined for a constant vector")]
    ConstantVector,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("variant {0} is not applicable here")]
    UnsupportedVariant(String),

    #[error("repeat {repeat} failed: {source}")]
    RepeatFailed {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::RaggedRow { .. } => "ragged_row",
            Error::UnknownIdentifiers(_) => "unknown_identifiers",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroRow { .. } => "zero_row",
            Error::Degenerate(_) => "degenerate",
            Error::BoundViolation { .. } => "bound_violation",
            Error::AlreadyNoisy => "already_noisy",
            Error::SingularPrecision => "singular_precision",
            Error::NonFinite { .. } => "non_finite",
            Error::ConstantVector => "constant_vector",
            Error::InsufficientSamples(_) => "insufficient_samples",
            Error::UnsupportedVariant(_) => "unsupported_variant",
            Error::RepeatFailed { .. } => "repeat_failed",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
