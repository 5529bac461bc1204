//! Error type shared by all modules.

/// One field-level problem in a scenario/config file, located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "at \"{}\": {}", self.pointer, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a structural precondition (shape, sign, normalization…).
    #[error("validation error: {0}")]
    Validation(String),

    /// Input is structurally fine but outside the mathematical domain
    /// (e.g. a scalar map non-finite on an eigenvalue).
    #[error("domain error: {0}")]
    Domain(String),

    /// Reversible chain with no usable spectral gap (reducible within tolerance).
    #[error("no spectral gap: {0}")]
    NoSpectralGap(String),

    /// Covering-coupling feasibility failed: the measure does not have the
    /// stochastic covering property at this conditioning context.
    #[error("SCP violated at {context}: deficient cut {cut:?}")]
    ScpViolated { context: String, cut: Vec<String> },

    /// Exact enumeration refused beyond the supported size.
    #[error("{what} capped at {max} (got {got}): {advice}")]
    SizeCap {
        what: String,
        max: usize,
        got: usize,
        advice: String,
    },

    /// Quadrature rule too coarse for the requested polynomial expectation.
    #[error("quadrature order {got} insufficient ({context}); required order {required}")]
    QuadratureOrder {
        required: usize,
        got: usize,
        context: String,
    },

    /// A supremum that is not attained on any finite grid (e.g. ‖Γ(f)‖ for
    /// non-affine f with no bounding box supplied).
    #[error("{0}")]
    Unbounded(String),

    /// Scenario/config problems with JSON-pointer locations.
    #[error("configuration errors: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigError>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
