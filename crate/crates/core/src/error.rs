use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("{what} is not positive definite (smallest eigenvalue {min_eig:.3e}, tolerance {tol:.3e})")]
    NotPositiveDefinite {
        what: &'static str,
        min_eig: f64,
        tol: f64,
    },

    #[error("L + S is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    SingularSum { min_eig: f64 },

    #[error("L + S lost positive definiteness at iteration {iteration} (smallest eigenvalue {min_eig:.3e})")]
    SingularLagrangian { iteration: usize, min_eig: f64 },

    #[error("non-finite entry in block {block} at iteration {iteration}")]
    NonFiniteIterate { iteration: usize, block: &'static str },

    #[error("initial rank {d} out of range [1, {max}]")]
    BadInitRank { d: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample covariance is rank deficient (smallest eigenvalue {min_eig:.3e}); need N >= p")]
    RankDeficientCovariance { min_eig: f64 },

    #[error("loading matrix has rank below {rank} after {attempts} draws")]
    DegenerateDraw { rank: usize, attempts: usize },

    #[error("empty trial set")]
    EmptyTrialSet,

    #[error("estimated loading matrix is zero")]
    ZeroEstimate,

    #[error("every cross-validation cell failed")]
    AllCellsFailed,

    #[error("Lipschitz estimate must be positive, got {0}")]
    NonPositiveK(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
