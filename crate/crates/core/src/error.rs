use std::path::PathBuf;

/// Errors surfaced by the library and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration or experiment spec failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Matrix/vector dimensions do not agree with the system configuration.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The effective channel seen through the RIS is exactly zero, so the
    /// matched-filter beamformer is undefined.
    #[error("degenerate channel: effective channel is zero")]
    DegenerateChannel,

    /// An averaging operation received no realizations.
    #[error("empty realization stream")]
    EmptyStream,

    /// File I/O failure, with the offending path attached.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 for bad config, 3 for I/O trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
