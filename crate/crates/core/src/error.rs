use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed WAV header: {0}")]
    WavHeader(String),
    #[error("multi-channel WAV input ({0} channels); only mono is accepted")]
    MultiChannel(u16),
    #[error("unsupported WAV encoding: format tag {format_tag}, {bits_per_sample} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits_per_sample: u16 },
    #[error("corrupt archive record: {0}")]
    CorruptArchive(String),
    #[error("archive record at offset {offset} holds key {found:?}, expected {expected:?}")]
    KeyMismatch {
        offset: u64,
        expected: String,
        found: String,
    },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} distinct frames, found {found}")]
    InsufficientDistinctFrames { needed: usize, found: usize },
    #[error("label {label} out of range for codebook size {k}")]
    LabelOutOfRange { label: i64, k: usize },
    #[error("value out of range: {0}")]
    OutOfRange(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::WavHeader(_)
            | Error::MultiChannel(_)
            | Error::UnsupportedEncoding { .. }
            | Error::CorruptArchive(_)
            | Error::KeyMismatch { .. } => ErrorKind::Io,
            Error::Config(_)
            | Error::DimMismatch { .. }
            | Error::SampleRateMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::InvalidRecord(_)
            | Error::OutOfRange(_) => ErrorKind::Config,
            Error::InsufficientDistinctFrames { .. } | Error::LabelOutOfRange { .. } => {
                ErrorKind::Numeric
            }
        }
    }
}
