use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("diagonal entry {index} is {value}, expected 0")]
    NonZeroDiagonal { index: usize, value: f64 },

    #[error("entry ({row}, {col}) = {value} is not binary")]
    NotBinary { row: usize, col: usize, value: f64 },

    #[error("entry ({row}, {col}) = {value} lies outside [0, 1]")]
    OutOfUnitInterval { row: usize, col: usize, value: f64 },

    #[error("negative weight {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("graph batch is empty")]
    EmptyBatch,

    #[error("embedding dimension {d} outside [1, {max}]")]
    DimensionOutOfRange { d: usize, max: usize },

    #[error("{requested} leading eigenvalues requested but only {nonnegative} are nonnegative")]
    NegativeEigenvalues { requested: usize, nonnegative: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no admissible flip found after {attempts} attempts")]
    FlipExhausted { attempts: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical kernels rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegativeEigenvalues { .. }
                | Error::NotPsd { .. }
                | Error::Singular
                | Error::Lapack { .. }
                | Error::FlipExhausted { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
