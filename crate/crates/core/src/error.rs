use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its domain. The string names the offending field.
    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// The requested analysis does not apply to the given model.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// An infinite-buffer analysis was requested for an overloaded system.
    #[error(
        "unstable system: cumulative utilization through class {class} is {load} (must be < 1)"
    )]
    Unstable { class: usize, load: f64 },

    /// A probability that must stay below one reached it.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Inputs that make a conditional quantity undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Two routes to the same quantity disagree beyond rounding.
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    /// The simulation saw a queue grow past its cap.
    #[error("simulation diverged: class {class} queue exceeded {cap} packets")]
    SimulationDiverged { class: usize, cap: usize },
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
