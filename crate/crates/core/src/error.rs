use thiserror::Error;

/// Errors raised by model construction, analysis, fitting and export.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("model has no branches")]
    EmptyModel,

    #[error("branch probabilities sum to {sum}, not 1")]
    ProbSumInvalid { sum: f64 },

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("rate {0} is not strictly positive and finite")]
    NonPositiveRate(f64),

    #[error("unsupported topology: {0}")]
    UnsupportedShape(String),

    #[error("laplace transform evaluated on the pole s = -{0}")]
    PoleEvaluation(f64),

    #[error("subgenerator is singular")]
    SingularSubgenerator,

    #[error("time {0} is negative")]
    NegativeTime(f64),

    #[error("all routing probabilities are zero or attached to instantaneous branches")]
    DegenerateProbs,

    #[error("{name} must be strictly positive and finite, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("routing probability {p} outside (0, {p_max}]")]
    POutOfRange { p: f64, p_max: f64 },

    #[error(
        "zero variance (deterministic time) cannot be represented by a finite phase-type model"
    )]
    DeterministicUnrepresentable,

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("observation {0} is negative or not finite")]
    NegativeObservation(f64),

    #[error("absorbing state is unreachable from state {0}")]
    ReducibleChain(String),

    #[error("invalid CTMC: {0}")]
    InvalidCtmc(String),

    #[error("unstable system: utilization {rho} >= 1")]
    UnstableSystem { rho: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
