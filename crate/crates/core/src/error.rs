use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: empty body (header only)")]
    EmptyBody { path: String },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        path: String,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}, column {column}: value is not finite")]
    NonFinite {
        path: String,
        row: usize,
        column: String,
    },

    #[error("feature {0:?} has zero pooled standard deviation")]
    ZeroVariance(String),

    #[error("degenerate variance: both samples are constant")]
    DegenerateVariance,

    #[error("p-value {0} outside [0, 1]")]
    PValueRange(f64),

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error("feature mismatch at column {index}: {left:?} vs {right:?}")]
    FeatureMismatch {
        index: usize,
        left: String,
        right: String,
    },

    #[error("elastic net did not converge for feature {0:?}")]
    NonConvergence(String),

    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("structural models do not share a graph: {0}")]
    DagMismatch(String),

    #[error("all attribution scores are zero")]
    AllZeroScores,

    #[error("source and target means coincide; transition percentage undefined")]
    IdenticalStates,

    #[error("gradient at the origin is zero; nothing to optimize")]
    ZeroGradient,

    #[error("path has no solution with non-empty support")]
    EmptyPath,

    #[error("requested {requested} items but only {available} available")]
    TooFew { requested: usize, available: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("seed {seed}: {source}")]
    Seed { seed: u64, source: Box<Error> },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Bad input or configuration, as opposed to a failure inside an algorithm.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NonConvergence(_) | Error::DagMismatch(_) | Error::AllZeroScores | Error::ZeroGradient | Error::EmptyPath => false,
            Error::Seed { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
