use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration of {count} strategies exceeds the cap of {cap}")]
    TooManyStrategies { count: u128, cap: usize },

    #[error("invalid efficiency: {0}")]
    Efficiency(String),

    #[error("invalid projector: {0}")]
    Projector(String),

    #[error("no violation possible in this noise regime (denominator {0:.6})")]
    NoViolationRegime(f64),

    #[error("malformed conic program: {0}")]
    Program(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("efficiencies inconsistent with any local hidden-state model")]
    InconsistentEfficiencies,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
