use thiserror::Error;

/// Errors produced by distribution evaluation, estimation and test machinery.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An observation was not strictly inside the unit interval.
    #[error("observation {index} = {value} lies outside the open interval (0, 1)")]
    InvalidObservation { index: usize, value: f64 },

    /// A dataset was empty or too small for the requested operation.
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    /// Adaptive quadrature could not meet the requested tolerance.
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    /// A truncated series hit its hard term cap before converging.
    #[error("series truncation cap of {cap} terms reached")]
    TruncationCap { cap: usize },

    /// A cdf handed to the bisection inverter was not monotone.
    #[error("cdf evaluations are not monotone near y = {0}")]
    NonMonotoneCdf(f64),

    /// No optimizer start converged to a stationary point.
    #[error("optimization failed to converge: {0}")]
    NonConvergence(String),

    /// The observed-data log-likelihood decreased during EM, which signals
    /// an implementation bug rather than a property of the data.
    #[error("log-likelihood decreased by {drop} at EM cycle {cycle}")]
    EmLoglikDecreased { cycle: usize, drop: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

/// Rejects any observation outside the open unit interval, naming the first
/// offending index.
pub fn validate_unit_observations(data: &[f64]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidObservation { index, value });
        }
    }
    Ok(())
}
