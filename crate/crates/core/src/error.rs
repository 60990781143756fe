use thiserror::Error;

/// Errors surfaced by the solver pipeline.
///
/// Validation problems (bad parameters, violated model assumptions) are kept
/// apart from numerical failures (lost brackets, corrupted roots) so that
/// callers can map them to distinct exit codes.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A Laplace exponent was evaluated at one of its poles.
    #[error("Laplace exponent evaluated at a pole (theta = {theta})")]
    PoleEvaluation { theta: f64 },

    /// A tail integral does not converge: some growth rate reaches the decay rate.
    #[error("divergent tail integral: rate {rate} >= decay {decay}")]
    DivergentIntegral { rate: f64, decay: f64 },

    /// Root isolation lost a bracket that the pole-interlacing structure guarantees.
    #[error("root isolation failure: {0}")]
    RootIsolationFailure(String),

    /// The boundary derivatives of a scale function disagree with their closed forms.
    #[error("boundary value mismatch: {0}")]
    BoundaryMismatch(String),

    /// No sign change found where the threshold calculus guarantees one.
    #[error("bracket failure: {0}")]
    BracketFailure(String),

    /// The variational inequality failed at one or more grid points.
    #[error("HJB verification failed at {} grid point(s)", offenders.len())]
    HjbViolation { offenders: Vec<HjbOffender> },

    /// A simulation or run configuration violates its preconditions.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Model parameters are structurally unusable (not merely assumption-violating).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The model violates the standing assumptions required by the solver.
    #[error("model assumptions violated: {0}")]
    AssumptionViolated(String),
}

/// One grid point at which the variational inequality failed.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HjbOffender {
    pub x: f64,
    /// Signed residual of the inequality (positive means violated).
    pub residual: f64,
    pub what: &'static str,
}

pub type Result<T> = std::result::Result<T, Error>;
