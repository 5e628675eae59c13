use thiserror::Error;

/// Errors produced by the simulator and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its type invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation was called outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The propagated state lost positivity beyond tolerance.
    #[error("density matrix lost positivity at t = {time_ns} ns (min eigenvalue {min_eigenvalue:e}); check the dephasing parameters")]
    Positivity { time_ns: f64, min_eigenvalue: f64 },

    /// A propagation failure inside a sweep, tagged with its grid point.
    #[error("sweep point ({axis1}, {axis2:?}) failed: {source}")]
    SweepPoint {
        axis1: f64,
        axis2: Option<f64>,
        #[source]
        source: Box<Error>,
    },

    /// A least-squares fit failed to produce a usable result.
    #[error("fit failed: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by unphysical dynamics rather than bad input.
    pub fn is_physics(&self) -> bool {
        match self {
            Error::Positivity { .. } => true,
            Error::SweepPoint { source, .. } => source.is_physics(),
            _ => false,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
