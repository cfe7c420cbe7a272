use markov_llt_core::Error;

/// Failures of a CLI run, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Bad invocation or configuration (exit 2).
    #[error("{0}")]
    Config(String),
    /// A numeric routine gave up (exit 3).
    #[error("{op}: {source}")]
    Numeric {
        op: &'static str,
        #[source]
        source: Error,
    },
    /// Writing artifacts failed (exit 2).
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Numeric { .. } => 3,
        }
    }
}

/// Tags a core error with the operation that raised it.
pub trait Context<T> {
    fn during(self, op: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for Result<T, Error> {
    fn during(self, op: &'static str) -> Result<T, RunError> {
        self.map_err(|source| match source {
            // Input validation problems are configuration errors.
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::AlphaOutOfRange { .. }
            | Error::DegreeTooHigh { .. }
            | Error::NotSquare { .. }
            | Error::NonConservative { .. }
            | Error::NegativeRate { .. }
            | Error::Reducible { .. } => RunError::Config(format!("{op}: {source}")),
            source => RunError::Numeric { op, source },
        })
    }
}
