use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("topology mismatch: expected {expected} joints, found {found}")]
    TopologyMismatch { expected: usize, found: usize },

    #[error("no input frames found in {}", .0.display())]
    EmptyInput(PathBuf),

    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("joint {joint} is missing in every frame")]
    UnrecoverableJoint { joint: usize },

    #[error("degenerate pose: median torso scale {scale:e} is too small")]
    DegeneratePose { scale: f64 },

    #[error(
        "insufficient length{context}: spectrum has {available} coefficients, \
         bins need {required}; at least {min_frames} frames are required"
    )]
    InsufficientLength {
        available: usize,
        required: usize,
        min_frames: usize,
        context: String,
    },

    #[error("unknown topology preset {name:?}; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("aliasing: band edge {edge} Hz is at or above the Nyquist frequency {nyquist} Hz")]
    Aliasing { edge: f64, nyquist: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
