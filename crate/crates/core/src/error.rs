use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shooting did not converge: {0}")]
    NonConvergence(String),
    #[error("boundary fit window holds {0} nodes, need at least 8")]
    WindowTooCoarse(usize),
    #[error("no admissible sigma0 above the floor {0:e}")]
    NoAdmissibleSigma(f64),
    #[error("configurations have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("ball {ball} contains only {cells} cells (need 100)")]
    GridTooCoarse { ball: usize, cells: usize },
    #[error("field does not emerge around the configuration: {0}")]
    NotEmerging(String),
    #[error("emerging piece {0} is identically zero")]
    ZeroPiece(usize),
    #[error("conjugate gradients stalled at relative residual {0:e}")]
    SolverStall(f64),
    #[error("degenerate Gram system on patch {0}")]
    DegenerateGram(usize),
    #[error("quadratic form of piece {0} is nonnegative")]
    HypothesisViolated(usize),
    #[error("no Nehari root below 1e6 for piece {0}")]
    NoRoot(usize),
    #[error("iteration cap {0} reached")]
    MaxIterations(usize),
    #[error("precondition failed: {0}")]
    PreconditionFail(String),
    #[error("hypothesis failed: {0}")]
    HypothesisFail(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the batch front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Io(_) | Error::Csv(_) => 1,
            Error::NoAdmissibleSigma(_)
            | Error::SizeMismatch(..)
            | Error::GridTooCoarse { .. }
            | Error::NotEmerging(_)
            | Error::ZeroPiece(_)
            | Error::HypothesisViolated(_)
            | Error::PreconditionFail(_)
            | Error::HypothesisFail(_)
            | Error::WindowTooCoarse(_) => 2,
            Error::NonConvergence(_)
            | Error::SolverStall(_)
            | Error::DegenerateGram(_)
            | Error::NoRoot(_)
            | Error::MaxIterations(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
