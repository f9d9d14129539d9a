use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid Hurst vector: {0}")]
    InvalidHurst(String),

    #[error("invalid spectral measure: {0}")]
    InvalidMeasure(String),

    #[error("density is singular at the origin")]
    Singular,

    #[error("operation `{op}` is not defined for {variant} measures")]
    Variant {
        op: &'static str,
        variant: &'static str,
    },

    #[error("quadrature did not converge: estimate {estimate:e} with error {abs_error:e}")]
    Quadrature { estimate: f64, abs_error: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unsupported dimension {0}: direct quadrature handles N <= 3")]
    UnsupportedDimension(usize),

    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    Budget {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("matrix is not positive semidefinite: worst eigenvalue {worst_eigenvalue:e}")]
    NotPsd { worst_eigenvalue: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
