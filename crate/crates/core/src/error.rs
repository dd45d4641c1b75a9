use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter was outside the domain of the operation.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Slack rate not above the envelope rate, so the bounding function
    /// coefficient would have a nonpositive denominator.
    #[error("infeasible rate {rate}: must exceed envelope rate {rho}")]
    InfeasibleRate { rate: f64, rho: f64 },

    #[error("departure trace exceeds arrival trace at slot {slot}")]
    CausalityViolation { slot: usize },

    #[error("traces have different horizons ({arrival} vs {departure})")]
    HorizonMismatch { arrival: usize, departure: usize },

    #[error("slot {slot} is beyond the trace horizon {horizon}")]
    BeyondHorizon { slot: usize, horizon: usize },

    #[error("tail does not decay exponentially: {0}")]
    DivergentTail(String),

    #[error("no feasible parameter choice: {0}")]
    Infeasible(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
