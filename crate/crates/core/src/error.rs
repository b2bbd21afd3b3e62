//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A column has zero sample variance and cannot be standardized.
    #[error("column {0:?} has zero variance")]
    ConstantColumn(String),

    /// The Gram matrix of the treatments is numerically singular.
    #[error("gram matrix is numerically singular")]
    SingularGram,

    /// The Gram matrix condition number exceeds the configured cap.
    #[error("gram matrix condition number {cond:.3e} exceeds cap {cap:.3e}")]
    IllConditioned { cond: f64, cap: f64 },

    /// Too few usable design points for a trimmed fit.
    #[error("fewer than {h} nonzero design points for trimmed fit")]
    DegenerateDesign { h: usize },

    /// A (K*, P*) pair outside the range required by the critical value.
    #[error("invalid specificity bounds: {0}")]
    InvalidBounds(String),

    /// The instrument-exposure association matrix has column rank below K.
    #[error("instrument-exposure matrix is rank deficient")]
    RankDeficient,

    /// Any other precondition violation on caller-supplied values.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// More than 5% of resampling replicates failed.
    #[error("{dropped} of {total} resampling replicates failed")]
    TooManyFailures { dropped: usize, total: usize },

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
