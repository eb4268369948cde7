use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator lacks the {0} flag")]
    MissingFlag(&'static str),

    /// A numerical check that a value is hermitian/unitary/a projector/real failed.
    #[error("{what} certification failed: residual {residual:e} exceeds {tolerance:e}")]
    Certification {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("state norm {0} cannot be normalized")]
    Unnormalizable(f64),

    #[error("hermitian eigensolver did not converge")]
    EigenFailure,

    #[error("invalid correlation spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grid is not uniformly spaced")]
    NonUniformSpacing,

    #[error("scan grid is empty")]
    EmptyScan,

    /// Probability reached the edge of a periodic grid and would wrap around.
    #[error("probability {mass:e} near the periodic boundary at t = {t}")]
    BoundaryLeak { mass: f64, t: f64 },
}

impl Error {
    /// True for failures of a numerical certification (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Certification { .. } | Error::EigenFailure | Error::BoundaryLeak { .. }
        )
    }
}
