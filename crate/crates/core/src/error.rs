use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration exceeded {max_steps} steps without meeting the stop condition")]
    MaxSteps { max_steps: usize },

    #[error("trajectory does not cross {height} m while descending")]
    Qualification { height: f64 },

    #[error("not interceptable: {0}")]
    NotInterceptable(String),

    #[error("time ordering violated: requested {requested} s is before {current} s")]
    Ordering { current: f64, requested: f64 },

    #[error("measurement rejected: {0}")]
    Rejected(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid config at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
