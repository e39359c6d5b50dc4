use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the operation's domain (bad window, sign, ordering...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    /// The functional is not defined for this weight (e.g. `g` summable).
    #[error("refused: {0}")]
    Refused(String),

    #[error("numeric error: {what} (achieved {achieved:e}, requested {requested:e})")]
    Numeric {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Error {
        Error::Domain(msg.into())
    }

    pub fn numeric(what: impl Into<String>, achieved: f64, requested: f64) -> Error {
        Error::Numeric {
            what: what.into(),
            achieved,
            requested,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
