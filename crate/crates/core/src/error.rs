use thiserror::Error;

use crate::context::ArmId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed event record: {0}")]
    Malformed(String),

    #[error("chosen arm not in context: {0}")]
    ChosenNotInContext(ArmId),

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("propensity {0} outside (0, 1]")]
    InvalidPropensity(f64),

    #[error("empty arm set")]
    EmptyArmSet,

    #[error("duplicate arm id {0}")]
    DuplicateArm(ArmId),

    #[error("empty feature vector")]
    EmptyFeatures,

    #[error("non-finite feature value {0}")]
    NonFinite(f64),

    #[error("inconsistent x dimension: expected {expected}, found {found}")]
    InconsistentX { expected: usize, found: usize },

    #[error("inconsistent z dimension: expected {expected}, found {found}")]
    InconsistentZ { expected: usize, found: usize },

    #[error("partial shared-feature coverage")]
    PartialSharedFeatures,

    #[error("hidden rewards missing arm {0}")]
    HiddenCoverage(ArmId),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("confidence width variance {0} is negative beyond rounding")]
    NegativeVariance(f64),

    #[error("unknown arm {0}")]
    UnknownArm(ArmId),

    #[error("logging propensity {found} is not uniform (expected {expected}); enable rejection sampling")]
    NonUniformLogging { expected: f64, found: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid membership vector: {0}")]
    InvalidMembership(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {source}")]
    AtLine {
        path: String,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
