use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its valid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Shapes of two operands are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A numerical routine failed (non-convergence, overflow guard, non-finite values).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A file could not be parsed.
    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)*) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($arg)*)));
        }
    };
}

pub(crate) use ensure;
