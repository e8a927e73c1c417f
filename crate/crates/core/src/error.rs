use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("image is not 8-bit grayscale ({0})")]
    NotGrayscale(String),

    #[error("map metadata: {0}")]
    Metadata(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("invalid binning: {0}")]
    InvalidBinning(String),

    #[error("heading is not finite: {0}")]
    NonFiniteAngle(f64),

    #[error("posterior undefined with alpha = 0 and no observations; fall back to the uniform distribution")]
    UndefinedPosterior,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cell {cell} is not a probability vector: {reason}")]
    InvalidDistribution { cell: usize, reason: String },

    #[error("{format}: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("adapter config: {0}")]
    Config(String),

    #[error("every observation was skipped ({skipped} outside the grid or without heading)")]
    AllSkipped { skipped: usize },

    #[error("occupancy grid has no free cells")]
    NoFreeCells,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
