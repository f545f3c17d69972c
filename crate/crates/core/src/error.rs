use std::path::PathBuf;

use thiserror::Error;

use crate::types::Modality;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The on-disk layout or a file's contents do not match the documented format.
    #[error("format error: {0}")]
    Format(String),

    /// A channel or label file disagrees with what the manifest declares.
    #[error("integrity error in channel {channel}: {detail}")]
    Integrity { channel: String, detail: String },

    #[error("filter design error: {0}")]
    Design(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing modality {0}")]
    MissingModality(Modality),

    #[error("insufficient beats: found {found}, need at least 2")]
    InsufficientBeats { found: usize },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn integrity(channel: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Integrity {
            channel: channel.into(),
            detail: detail.into(),
        }
    }
}
