use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed circuit or a structural property required by an operation is missing.
    #[error("structure error: {0}")]
    Structure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("scope error: {0}")]
    Scope(String),

    #[error("field error: {0}")]
    Field(String),

    /// The two circuits are not compatible; `witness` names the offending pair.
    #[error("incompatible circuits: {witness}")]
    Incompatible { witness: String },

    #[error("unsupported input-function pair: {0}")]
    UnsupportedPair(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
