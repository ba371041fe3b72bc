use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report. Variants carry enough context for the
/// CLI to produce a structured error document.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative rate {value} in block A[{block}] at ({row},{col})")]
    NegativeRate {
        block: i64,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("diagonal entry {row} of the level-preserving block must be strictly negative (got {value})")]
    BadDiagonal { row: usize, value: f64 },
    #[error("row {row} of the phase generator sums to {sum} > 0")]
    RowSumExceedsZero { row: usize, sum: f64 },
    #[error("phase generator is reducible")]
    ReducibleGenerator,
    #[error("level/phase chain is reducible")]
    ReducibleChain,
    #[error("phase {phase} is a subordinator (sigma2 = 0, drift {drift} >= 0)")]
    SubordinatorPhase { phase: usize, drift: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("linear system is numerically singular: {0}")]
    SingularSolve(String),
    #[error("singular pivot in LU factorisation ({context})")]
    SingularPivot { context: String },
    #[error("argument must be nonzero")]
    ZeroArgument,
    #[error("fixed-point iteration did not reach tolerance after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded {
        iterations: usize,
        residual: f64,
        best: DMatrix<f64>,
    },
    #[error("residual {residual:e} of {what} exceeds {limit:e}")]
    ResidualTooLarge {
        what: String,
        residual: f64,
        limit: f64,
    },
    #[error("process is null recurrent: occupation matrices are infinite")]
    NullRecurrent,
    #[error("no admissible alpha found on the scan grid")]
    NoValidAlpha,
    #[error("process is null recurrent and A[-1] is singular; Theta is unavailable")]
    NullRecurrentAndSingularA,
    #[error("horizon {have} too small, need at least {need}")]
    HorizonTooSmall { have: usize, need: usize },
    #[error("A[-1] is singular; scale matrices are unavailable")]
    SingularAminus1,
    #[error("z = {z} is outside the admissible domain ({reason})")]
    ZOutsideDomain { z: f64, reason: String },
    #[error("no computational route available: {0}")]
    NoValidRoute(String),
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("model is not defective (no killing)")]
    NotDefective,
    #[error("phase {phase} has zero variance; creeping identity not applicable")]
    FluidPhasePresent { phase: usize },
    #[error("{count} simulated paths hit the time cap")]
    CapExceeded { count: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model file: {0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeRate { .. } => "NegativeRate",
            Error::BadDiagonal { .. } => "BadDiagonal",
            Error::RowSumExceedsZero { .. } => "RowSumExceedsZero",
            Error::ReducibleGenerator => "ReducibleGenerator",
            Error::ReducibleChain => "ReducibleChain",
            Error::SubordinatorPhase { .. } => "SubordinatorPhase",
            Error::InvalidModel(_) => "InvalidModel",
            Error::SingularSolve(_) => "SingularSolve",
            Error::SingularPivot { .. } => "SingularPivot",
            Error::ZeroArgument => "ZeroArgument",
            Error::MaxIterExceeded { .. } => "MaxIterExceeded",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::NullRecurrent => "NullRecurrent",
            Error::NoValidAlpha => "NoValidAlpha",
            Error::NullRecurrentAndSingularA => "NullRecurrentAndSingularA",
            Error::HorizonTooSmall { .. } => "HorizonTooSmall",
            Error::SingularAminus1 => "SingularAminus1",
            Error::ZOutsideDomain { .. } => "ZOutsideDomain",
            Error::NoValidRoute(_) => "NoValidRoute",
            Error::WrongRegime(_) => "WrongRegime",
            Error::NotDefective => "NotDefective",
            Error::FluidPhasePresent { .. } => "FluidPhasePresent",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Format(_) => "Format",
        }
    }
}
