use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input point set is empty")]
    EmptyInput,

    #[error("quantization parameter {0} is outside [1, 21]")]
    QpOutOfRange(u32),

    #[error("coordinate {value} does not fit in {qp} bits")]
    CoordinateOutOfRange { value: u64, qp: u8 },

    #[error("quantization parameter mismatch: {0} vs {1}")]
    QpMismatch(u8, u8),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("similarity is undefined when both points are at the origin")]
    UndefinedSimilarity,

    #[error("point lies in the plane of the eye (z = 0)")]
    PointAtEye,

    #[error("malformed PLY: {0}")]
    Ply(String),

    #[error("unsupported PLY property type `{ty}` for property `{property}`")]
    PlyUnsupportedProperty { property: String, ty: String },

    #[error("PLY declares {declared} vertices but {found} were read")]
    PlyCountMismatch { declared: usize, found: usize },

    #[error("malformed bitstream: {0}")]
    Bitstream(String),

    #[error("truncated occupancy stream")]
    TruncatedOccupancy,

    #[error("empty occupancy code for an occupied node")]
    EmptyOccupancyCode,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
