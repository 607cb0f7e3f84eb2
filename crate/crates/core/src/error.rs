use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a mathematical function.
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    /// A configuration field failed validation.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// The channel produces no detections at all, so click fractions are undefined.
    #[error("degenerate channel: overall gain is zero")]
    DegenerateChannel,

    /// Observed data cannot support an estimate (for example no signal clicks).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The failure probability of the estimate exceeds the configured budget.
    #[error("failure probability {eps:e} exceeds the budget {budget:e}")]
    BudgetExceeded { eps: f64, budget: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
