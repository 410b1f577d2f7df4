use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel matrix is not positive semi-definite: {what} = {value:e}")]
    NotPsd { what: &'static str, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty dimension profile table")]
    EmptyProfile,

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "infeasible: D = {d:.6} but at least {required:.6} is needed for delta = {delta} (Delta = {delta_cap:.6})"
    )]
    Infeasible {
        d: f64,
        required: f64,
        delta: f64,
        delta_cap: f64,
    },

    #[error("no feasible delta on the grid: best Delta = {max_delta_cap:.6}")]
    NoFeasibleDelta { max_delta_cap: f64 },

    #[error("theta = {theta} outside admissible interval [{lo}, {hi}]")]
    ThetaOutOfRange { theta: f64, lo: f64, hi: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("radius {radius} too small: no samples hit it (smallest feature distance {min_distance:.6})")]
    RadiusTooSmall { radius: f64, min_distance: f64 },

    #[error("model invariant violated: {0}")]
    ModelInvariant(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
