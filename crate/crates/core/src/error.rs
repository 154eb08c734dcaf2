use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: wrong dimensions, out-of-range parameters.
    #[error("invalid input: {0}")]
    Input(String),

    /// A geometric object violates its construction invariants.
    #[error("validation failed: {0}")]
    Validation(String),

    /// The set is not compact: a support query or a centering diverged.
    #[error("set is unbounded: {0}")]
    Unbounded(String),

    /// No strictly feasible point could be constructed.
    #[error("set has empty interior or no strictly feasible start: {0}")]
    EmptyInterior(String),

    /// The starting point handed to the barrier solver is not strictly feasible.
    #[error("starting point violates constraint {index}: value {value:e} is not < 0")]
    InfeasibleStart { index: usize, value: f64 },

    /// The starting point is outside the domain of the objective.
    #[error("starting point is outside the objective domain")]
    ObjectiveDomain,

    /// The Newton system could not be factored.
    #[error("Newton system is not positive definite (pivot {pivot:e}) at iterate {iterate:?}")]
    Conditioning { pivot: f64, iterate: Vec<f64> },

    /// The request is valid but exceeds what this implementation supports.
    #[error("unsupported: {0}")]
    Capability(String),
}
