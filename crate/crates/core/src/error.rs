use thiserror::Error;

use crate::glm::CoefVector;

pub type Result<T> = std::result::Result<T, SmleError>;

#[derive(Debug, Error)]
pub enum SmleError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid response for {family} family: {detail}")]
    InvalidResponse { family: String, detail: String },

    #[error("design restricted to the support is singular (rank deficient)")]
    SingularDesign,

    /// Newton iterations did not settle. Carries the last iterate.
    #[error("Newton refit did not converge after {iterations} iterations: {reason}")]
    NonConvergence {
        iterations: usize,
        reason: String,
        last: CoefVector,
    },

    /// u-search ran out of tries. Carries the iterate it started from.
    #[error("step-size search exhausted after {tries} tries")]
    StepSizeExhausted { tries: usize, beta: CoefVector },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("covariance matrix is not positive semidefinite: {0}")]
    NotPositiveDefinite(String),

    #[error("empty candidate set")]
    EmptyCandidateSet,

    #[error("no admissible sub-model: every candidate refit failed")]
    NoAdmissibleModel,

    #[error("selection result carries no vote counts")]
    MissingVotes,

    #[error("{0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(String),
}
