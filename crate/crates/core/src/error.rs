use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("singular system in LMMSE filter (v2 = {v2}, sigma2 = {sigma2})")]
    SingularSystem { v2: f64, sigma2: f64 },

    #[error("invalid noise level {0}")]
    InvalidNoiseLevel(f64),

    #[error("invalid Monte-Carlo step {0}")]
    InvalidStep(f64),

    #[error("degenerate divergence-free direction (squared norm {0:e})")]
    DegenerateDirection(f64),

    #[error("invalid denoiser spec: {0}")]
    InvalidSpec(String),

    #[error("failed to spawn plugin `{command}`: {source}")]
    PluginSpawn {
        command: String,
        #[source]
        source: io::Error,
    },

    #[error("plugin protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("plugin timed out after {0:?}")]
    PluginTimeout(std::time::Duration),

    #[error("D-OAMP requires a known noise variance")]
    MissingNoiseLevel,

    #[error("invalid operator statistics: trace of gram = {0}")]
    InvalidOperatorStats(f64),

    #[error("reference signal has zero energy")]
    ZeroReference,

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("unsupported PGM maxval {0}")]
    UnsupportedMaxval(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PluginSpawn { .. }
            | Error::ProtocolViolation(_)
            | Error::PluginTimeout(_)
            | Error::MalformedHeader(_)
            | Error::TruncatedPayload { .. }
            | Error::UnsupportedMaxval(_)
            | Error::Io(_) => 4,
            Error::SingularSystem { .. } | Error::DegenerateDirection(_) => 3,
            _ => 2,
        }
    }
}
