use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed data or an argument outside its domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration that cannot be run (e.g. `n >= N` when a
    /// least-squares noise estimate is required).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Cholesky factorization failed even at the largest allowed jitter.
    #[error("{context}: factorization failed after jitter up to {max_jitter:e}")]
    Factorization { context: &'static str, max_jitter: f64 },

    /// A Gibbs draw produced a non-finite value.
    #[error("non-finite draw in {conditional} conditional at sweep {sweep}")]
    NonFiniteDraw {
        sweep: usize,
        conditional: &'static str,
    },

    /// Any other numeric failure, tagged with the module it came from.
    #[error("{context}: {message}")]
    Numeric {
        context: &'static str,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the data or configuration rather than by
    /// the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Config(_) | Error::Io { .. } | Error::Parse { .. }
        )
    }
}
