use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown model {0:?} (valid names: kdv, nls1d, zk, nls2d)")]
    UnknownModel(String),

    #[error("fixed-point iteration did not converge after {iterations} sweeps (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular linear operator: {0}")]
    Singular(String),

    #[error("snapshot matrix is zero")]
    ZeroMatrix,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("rank deficiency detected at pivot column {column}")]
    RankDeficient { column: usize },

    #[error("zero reference value in {0}")]
    ZeroReference(&'static str),

    #[error("bad magic: not an MSRM file")]
    BadMagic,

    #[error("unsupported MSRM version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated MSRM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
