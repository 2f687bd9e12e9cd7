use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numerical range error: {0}")]
    Range(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid subset {subset:?}: {reason}")]
    InvalidSubset { subset: Vec<usize>, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("exhaustive enumeration over {n} visible units exceeds the cap of {cap}")]
    TooManyVisible { n: usize, cap: usize },

    #[error(
        "expansion needs about {estimate:.3e} cumulant evaluations, above the budget of {budget:.3e}"
    )]
    BudgetExceeded { estimate: f64, budget: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("{0}")]
    EmptyInput(&'static str),

    #[error("only {survivors} annealing runs left after outlier removal (need at least 2)")]
    TooFewRuns { survivors: usize },

    #[error("bad IDX magic number at byte offset {offset}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { offset: usize, expected: u32, found: u32 },

    #[error("truncated IDX file at byte offset {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("IDX dimension mismatch at byte offset {offset}: {msg}")]
    IdxDimension { offset: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Range(_)
            | Error::NonFinite(_)
            | Error::NoConvergence { .. }
            | Error::TooFewRuns { .. } => ErrorClass::Numerical,
            Error::InvalidConfig(_) | Error::BudgetExceeded { .. } => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}
