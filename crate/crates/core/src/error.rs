use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("distance must be strictly positive (got {0} m)")]
    NonPositiveDistance(f64),

    #[error("exact order-statistics bound intractable for t_set = {t_set} (cap is {cap})")]
    ExactBoundIntractable { t_set: u64, cap: u64 },

    #[error("set-up time {t_set} exceeds the unicast-only limit of {limit:.3} slots")]
    SetupTooLong { t_set: u64, limit: f64 },

    #[error("objective is not finite anywhere on [{lo}, {hi}]")]
    NoFiniteObjective { lo: f64, hi: f64 },

    #[error("transmission did not complete within {limit} slots")]
    Stalled { limit: u64 },

    #[error("episode {index}: {source}")]
    Episode {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown figure `{0}` (expected fig3, fig4, fig5 or fig6)")]
    UnknownFigure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
