use thiserror::Error;

/// Errors shared across the laboratory modules.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the mathematical domain of an operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// An iterative solver failed to meet its tolerance.
    #[error("{op} failed to converge after {iters} iterations (last residual {residual:e})")]
    Convergence {
        op: &'static str,
        iters: usize,
        residual: f64,
    },

    /// A sampled construction violated one of its defining conditions.
    #[error("construction of {what} failed: {msg}")]
    Construction { what: &'static str, msg: String },

    /// A truncated series could not meet the requested tolerance.
    #[error("series tail bound {bound:e} exceeds requested tolerance {tol:e}")]
    TailBound { bound: f64, tol: f64 },

    /// The effective metric lost hyperbolicity during an evolution.
    #[error("hyperbolicity lost at t = {t}: g^tt = {gtt}")]
    HyperbolicityLoss { t: f64, gtt: f64 },

    /// The evolution tripped the instability detector.
    #[error("instability detected at t = {t}: sup |field| grew by {factor}")]
    Instability { t: f64, factor: f64 },

    /// Requested data is not covered by the supplied grid or archive.
    #[error("insufficient data for {op}: {msg}")]
    InsufficientData { op: &'static str, msg: String },

    /// A region or parameter request is inconsistent with the operation.
    #[error("invalid request for {op}: {msg}")]
    InvalidRequest { op: &'static str, msg: String },
}

impl Error {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub fn construction(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Construction {
            what,
            msg: msg.into(),
        }
    }

    pub fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidRequest {
            op,
            msg: msg.into(),
        }
    }

    pub fn insufficient(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InsufficientData {
            op,
            msg: msg.into(),
        }
    }
}
