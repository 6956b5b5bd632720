use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("qubit index {index} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("cannot trace out every qubit of the state")]
    TraceAll,

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("zero trace")]
    ZeroTrace,

    #[error("degenerate random draw after retry")]
    DegenerateDraw,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed or mismatched input data, as
    /// opposed to numerical breakdown.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::QubitOutOfRange { .. }
                | Error::TraceAll
                | Error::InvalidArgument(_)
                | Error::NonPhysical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
