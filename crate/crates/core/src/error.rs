use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty ROI: no foreground blocks found")]
    EmptyRoi,

    #[error("frequency estimation failed: no valid foreground block")]
    FrequencyEstimationFailed,

    #[error("insufficient minutiae: need at least 2, found {0}")]
    InsufficientMinutiae(usize),

    #[error("incompatible codes: {0}")]
    IncompatibleCodes(String),

    #[error("synthetic spec error: {0}")]
    Synth(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the image pipeline itself, as opposed to bad
    /// input data or parameters.
    pub fn is_pipeline_failure(&self) -> bool {
        matches!(
            self,
            Error::EmptyRoi | Error::FrequencyEstimationFailed | Error::InsufficientMinutiae(_)
        )
    }
}
