use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("buffer length {len} does not match shape {shape} ({expected} elements)")]
    LengthMismatch {
        shape: String,
        len: usize,
        expected: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("channel range {lo}..{hi} out of bounds for {channels} channels")]
    ChannelRange { lo: usize, hi: usize, channels: usize },

    #[error("{what}: {value} is not divisible by {divisor}")]
    Divisibility {
        what: &'static str,
        value: usize,
        divisor: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate box [{0}, {1}, {2}, {3}]")]
    DegenerateBox(f32, f32, f32, f32),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing weights for layer `{0}`")]
    MissingWeight(String),

    #[error("unknown layer `{0}` in weight manifest")]
    UnknownLayer(String),

    #[error("layer `{layer}` expects shape {expected:?}, manifest has {found:?}")]
    WeightShape {
        layer: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("weight blob truncated: layer `{layer}` needs bytes {start}..{end}, blob has {len}")]
    Truncated {
        layer: String,
        start: u64,
        end: u64,
        len: u64,
    },

    #[error("byte offset overflow for layer `{0}`")]
    OffsetOverflow(String),

    #[error("image id sets differ: {0}")]
    ImageIdMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
