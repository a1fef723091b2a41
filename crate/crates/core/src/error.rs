use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("sampling interval {dt_s} s is too coarse for {frequency_hz} Hz (Nyquist limit)")]
    Nyquist { frequency_hz: f64, dt_s: f64 },

    #[error("newton iteration did not converge at step {step} after {iterations} iterations (residual {residual:e} A)")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("singular nodal system at step {step}: {detail}")]
    Singular { step: usize, detail: String },

    #[error("malformed CSV at line {line}: {detail}")]
    Csv { line: usize, detail: String },

    #[error("time column is not strictly increasing at line {line}")]
    NonMonotoneTime { line: usize },

    #[error(
        "timestamp jitter at line {line} exceeds 1% of dt ({dt_s} s); pass --resample to resample"
    )]
    Jitter { line: usize, dt_s: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 validation, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::Singular { .. } => 2,
            Error::Io(_) => 3,
            Error::Context { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::Csv {
                line,
                detail: format!("{kind:?}"),
            },
        }
    }
}
