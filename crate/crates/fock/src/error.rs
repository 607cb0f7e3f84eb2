use thiserror::Error;

pub type Result<T, E = FockError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("{photons} photons exceed the truncation k_max = {k_max}")]
    Truncation { photons: usize, k_max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// A matrix passed as a density operator has a clearly negative eigenvalue.
    #[error("operator is not positive semidefinite: eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error(transparent)]
    Model(#[from] pmqkd::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
