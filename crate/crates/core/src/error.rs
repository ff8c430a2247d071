use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix market parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid sparse structure: {0}")]
    Structure(String),

    #[error("matrix is singular{0}")]
    Singular(String),

    #[error("zero column {0}")]
    ZeroColumn(usize),

    #[error("zero diagonal entry in row {0}; identity initial pattern requires a nonzero diagonal")]
    ZeroDiagonal(usize),

    #[error("least-squares matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("non-finite value produced in {context}")]
    Overflow { context: String },

    #[error("square root of a negative number")]
    Domain,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("preconditioner construction failed: {0}")]
    Preconditioner(String),

    #[error("unknown precision `{0}` (expected one of h, s, d, q)")]
    UnknownPrecision(String),
}

impl Error {
    pub(crate) fn overflow(context: impl Into<String>) -> Self {
        Error::Overflow {
            context: context.into(),
        }
    }
}
