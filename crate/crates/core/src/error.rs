use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty selection: no sample has corruption rate <= {threshold}")]
    EmptySelection { threshold: f64 },

    #[error("singular design")]
    SingularDesign,

    #[error("infeasible corruption rate {lambda}: the construction needs lambda >= {required}")]
    InfeasibleCorruptionRate { lambda: f64, required: f64 },

    /// The closed-form weights failed their own KKT check. Indicates a bug, not bad input.
    #[error("KKT residual {residual:e} exceeds tolerance")]
    KktViolation { residual: f64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
