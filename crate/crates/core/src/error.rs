use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: {len} samples, segment length is {nperseg}")]
    SignalTooShort { len: usize, nperseg: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("mismatched frequency grids: {0}")]
    MismatchedGrids(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("spectrum is identically zero")]
    ZeroSpectrum,

    #[error("spectrum is not normalized: l1 sum is {sum}")]
    NotNormalized { sum: f64 },

    #[error(
        "division by zero at bin {bin}: target power is zero where the reference is {source_power}"
    )]
    DivisionByZero { bin: usize, source_power: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sample rate mismatch: filter is {filter_hz} Hz, record is {record_hz} Hz")]
    SampleRateMismatch { filter_hz: f64, record_hz: f64 },

    #[error("circulant spectrum is not positive semidefinite: value {value} at bin {bin}")]
    NonPositiveSpectrum { bin: usize, value: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue}")]
    NotPsd { eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid length: {0}")]
    InvalidLength(String),

    #[error("frequency {freq_hz} Hz outside (0, {nyquist_hz}) Hz")]
    FrequencyOutOfRange { freq_hz: f64, nyquist_hz: f64 },

    #[error("grid mismatch: {0}; regenerate the PSDs with a matching sample rate and nfft")]
    GridMismatch(String),

    #[error("filter checksum mismatch: stored {stored}, recomputed {recomputed}")]
    ChecksumMismatch { stored: f64, recomputed: f64 },

    #[error("file missing: {}", .0.display())]
    FileMissing(PathBuf),

    #[error("size mismatch for {}: expected {expected} bytes, found {actual}", path.display())]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("parse error in {} at {location}: {message}", path.display())]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),

    #[error("channel {index}: {source}")]
    Channel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("subject {id}: {source}")]
    Subject {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_channel(self, index: usize) -> Self {
        Error::Channel {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_subject(self, id: &str) -> Self {
        Error::Subject {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with channel/subject context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Channel { source, .. } | Error::Subject { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(
            self.root(),
            Error::Io { .. } | Error::FileMissing(_) | Error::SizeMismatch { .. }
        )
    }
}
