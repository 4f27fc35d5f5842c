use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("point is off the unit sphere (|x| = {norm})")]
    OffSphere { norm: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("trace was already consumed by a backward pass")]
    TraceConsumed,

    #[error("loss reads `{requested}` components but the trace recorded `{recorded}`")]
    ComponentNotRecorded { requested: String, recorded: String },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("root finding failed for polynomial {coefficients:?}")]
    RootFinding { coefficients: Vec<f64> },

    #[error("run failed: {0}")]
    RunFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}
