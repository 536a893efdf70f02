//! Error types shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of grid construction, integration, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector shapes are incompatible with the requested operation.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A scalar argument lies outside its admissible range.
    #[error("{name} = {value} outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Path endpoints coincide, so there is no curve to discretize.
    #[error("degenerate path: endpoints coincide")]
    DegeneratePath,

    /// Caller passed an argument that violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The root-of-unity normalization sum vanished. Cannot happen for
    /// fewer than a full turn of consecutive roots; kept as a guard.
    #[error("root-of-unity phase sum is numerically zero")]
    DegeneratePhase,

    /// A right-hand-side denominator came too close to a primary body
    /// (1 = earth, 2 = moon).
    #[error("state within the singularity guard of body {body}")]
    Singularity { body: usize },

    /// A step of `integrate` failed; `index` identifies the step.
    #[error("step {index} failed: {source}")]
    StepFailed { index: usize, source: Box<Error> },

    /// A micro step inside a composition macro step failed.
    #[error("micro step {micro} failed: {source}")]
    MicroStepFailed { micro: usize, source: Box<Error> },

    /// No exact flow or reference trajectory to measure errors against.
    #[error("no exact flow or reference trajectory available")]
    NoReference,

    /// Every measured error sits at the rounding floor; no slope can be fitted.
    #[error("order indeterminate: all errors at the rounding floor")]
    IndeterminateOrder,

    /// A JSON or CSV document does not match its schema.
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Innermost cause of nested step failures.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } | Error::MicroStepFailed { source, .. } => {
                source.root_cause()
            }
            other => other,
        }
    }
}
