use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// The requested accuracy could not be certified (e.g. plane-wave truncation too small).
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Norm drift or step-size collapse inside a time integrator.
    #[error("integrator error: {0}")]
    Integrator(String),

    #[error("detection error: {0}")]
    Detection(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::InvalidInput(_)
            | Error::DegenerateInput(_) => 1,
            Error::Numerical(_) | Error::Accuracy(_) | Error::Integrator(_) | Error::Io(_) => 2,
            Error::Detection(_) => 3,
        }
    }
}
