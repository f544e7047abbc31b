use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("eigen/singular value iteration did not converge ({0})")]
    ConvergenceFailure(&'static str),

    #[error("matrix is numerically singular (rank {rank} < {dim})")]
    SingularInput { rank: usize, dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown variable `{name}` at byte {pos}")]
    UnknownVariable { name: String, pos: usize },

    #[error("inverse undefined for `{subexpression}` (sigma_min/sigma_max = {condition:e})")]
    Domain {
        subexpression: String,
        condition: f64,
    },

    #[error(
        "no domain point found after {trials} trials; failing subexpression `{subexpression}`"
    )]
    EmptyDomainSuspected {
        subexpression: String,
        trials: usize,
    },

    #[error("matrix is not unitary (||U*U - I||_F = {0:e})")]
    NotUnitary(f64),

    #[error("direction is zero: the linear part vanishes at the given tuple")]
    ZeroDirection,

    #[error("could not split a reducible tuple: {0}")]
    SplitFailure(String),

    #[error("point is not outside the spectrahedron (min eigenvalue {0:e})")]
    NotOutside(f64),

    #[error("point is not on the boundary of the spectrahedron (min eigenvalue {0:e})")]
    NotBoundary(f64),

    #[error("no real dependence found among {0} combination terms")]
    DependenceSolveFailure(usize),

    #[error("hermitian violation {violation:e} exceeds tolerance in {context}")]
    HermitianViolation { context: String, violation: f64 },

    #[error("matrix of size {0} exceeds the elimination cap of {1}")]
    TooLarge(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("json error: {0}")]
    Json(String),
}

impl Error {
    /// Input-side failures (malformed files, grammar errors) as opposed to
    /// numerical ones.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnknownVariable { .. }
                | Error::HermitianViolation { .. }
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
