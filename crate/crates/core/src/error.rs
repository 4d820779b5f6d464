use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The tree violates a structural invariant (partition, child coverage, theta shape).
    #[error("malformed probability tree: {0}")]
    MalformedTree(String),

    #[error("variable index {variable} out of range for a space of {num_variables} variables")]
    UnknownVariable {
        variable: usize,
        num_variables: usize,
    },

    #[error("value {value} out of range for variable {variable} with cardinality {cardinality}")]
    ValueOutOfRange {
        variable: usize,
        value: usize,
        cardinality: usize,
    },

    #[error("variable {0} is never assigned in the tree")]
    UnassignedVariable(usize),

    #[error("assignment has {got} values, expected {expected}")]
    AssignmentLength { got: usize, expected: usize },

    #[error(
        "record value {value} for variable {variable} contradicts the intervention to {forced}"
    )]
    InconsistentRecord {
        variable: usize,
        value: usize,
        forced: usize,
    },

    #[error("hypothesis subtrees are defined over different variable spaces")]
    SpaceMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("outcome space of {outcomes} assignments exceeds the enumeration cap of {cap}")]
    Capacity { outcomes: u128, cap: usize },

    #[error("strategy `{strategy}` is not applicable: {reason}")]
    UnsupportedStrategy {
        strategy: &'static str,
        reason: String,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
