use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition of an operation was not met (shapes, indices, ranges).
    Contract(String),
    /// Network fitting produced a non-finite loss.
    Training {
        /// Grid date the network was being fitted for, when known.
        date: Option<usize>,
        epoch: usize,
        loss: f64,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn at_date(self, n: usize) -> Self {
        match self {
            Error::Training { epoch, loss, .. } => Error::Training {
                date: Some(n),
                epoch,
                loss,
            },
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Training {
                date: Some(n),
                epoch,
                loss,
            } => {
                write!(
                    f,
                    "training failed at date index {n}, epoch {epoch}: loss = {loss}"
                )
            }
            Error::Training {
                date: None,
                epoch,
                loss,
            } => {
                write!(f, "training failed at epoch {epoch}: loss = {loss}")
            }
        }
    }
}

impl core::error::Error for Error {}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::contract(alloc::format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
