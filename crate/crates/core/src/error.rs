use thiserror::Error;

use crate::intervals::PartitionViolation;

/// Errors raised by the library.
///
/// Variants split into two families: hypothesis-type failures (the caller
/// handed in data outside an operation's contract) and numerical failures
/// (the data was admissible but a solver or guard tripped). The CLI maps the
/// first family to exit code 2 and the second to exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(PartitionViolation),

    #[error("range error: {0}")]
    Range(String),

    #[error("ill-conditioned system (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("no crossing: {0}")]
    NoCrossing(String),

    #[error("weight grading failed: {0}")]
    Grading(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("no bracket within horizon {horizon}")]
    Horizon { horizon: f64 },

    #[error("singular parameter: 1 + r t = {value} <= 0")]
    Singularity { value: f64 },

    #[error("no lattice element within matching distance {eps} (best {best})")]
    Matching { eps: f64, best: f64 },

    #[error("ambiguous lattice matching near the cusp: {0}")]
    CuspAmbiguity(String),

    #[error("numerical instability: {0}")]
    Numerical(String),
}

impl LabError {
    /// True for errors caused by inputs outside an operation's contract.
    pub fn is_hypothesis(&self) -> bool {
        matches!(
            self,
            LabError::Domain(_)
                | LabError::Precondition(_)
                | LabError::Hypothesis(_)
                | LabError::Parameter(_)
                | LabError::InvalidPartition(_)
                | LabError::Singularity { .. }
                | LabError::Matching { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
