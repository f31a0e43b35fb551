use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible cache state: {0}")]
    InfeasibleState(String),

    /// The dual bisection did not reach the capacity constraint.
    #[error("solver failed to converge (capacity residual {residual:e})")]
    SolverFailure { residual: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: file id {id} is out of range for a catalog of {n_files} files")]
    IdOutOfRange { line: usize, id: usize, n_files: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
