use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Total mechanical damping is not positive: the mode self-oscillates and
    /// has no steady-state occupancy.
    #[error("unstable configuration: total damping {total_damping_hz} Hz <= 0 (self-oscillation)")]
    Instability { total_damping_hz: f64 },

    #[error("degenerate input in {op}: {msg}")]
    Degenerate { op: &'static str, msg: String },

    #[error("{quantity} out of range: {value}")]
    OutOfRange { quantity: &'static str, value: f64 },

    #[error("no resolvable peak: peak height {peak} is within 5 floor standard deviations ({noise})")]
    NoPeak { peak: f64, noise: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("negative occupancy {0} implied by detected area")]
    NegativeOccupancy(f64),

    #[error("invalid {field}: {msg}")]
    Validation { field: String, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), msg: msg.into() }
    }
}
