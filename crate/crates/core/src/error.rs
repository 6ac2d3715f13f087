use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid membership matrix: {0}")]
    InvalidMembership(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cluster {cluster} has zero total membership weight")]
    DegenerateCluster { cluster: usize },

    #[error("invalid block grid: {0}")]
    InvalidGrid(String),

    #[error("index ({row}, {col}) is outside a {width}x{height} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },

    #[error("unsupported PGM magic number {0:?}")]
    UnsupportedMagic(String),

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("truncated PGM raster: expected {expected} samples, found {found}")]
    TruncatedRaster { expected: usize, found: usize },

    #[error("PGM sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u16 },

    #[error("ground truth is missing class {class:?} (looked for {path})")]
    MissingClass { class: String, path: PathBuf },

    #[error("failed to build worker pool: {0}")]
    WorkerPool(String),

    #[error("I/O error on {path}: {source}")]
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
}
