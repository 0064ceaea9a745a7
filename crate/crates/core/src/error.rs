use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::{Extent, Location};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel radius must be positive and finite, got {0}")]
    InvalidRadius(f64),

    #[error("location ({}, {}) lies outside a {}x{} image", .location.x, .location.y, .extent.width, .extent.height)]
    OutOfExtent { location: Location, extent: Extent },

    #[error("extent mismatch: expected {expected:?}, found {found:?}")]
    ExtentMismatch { expected: Extent, found: Extent },

    #[error("feature window {window_w}x{window_h} does not fit a {}x{} image", .extent.width, .extent.height)]
    WindowTooLarge {
        window_w: usize,
        window_h: usize,
        extent: Extent,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("no ground-truth objects in the evaluated set")]
    NoObjects,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot place {requested} objects with separation {separation} in a {}x{} image", .extent.width, .extent.height)]
    InfeasibleLayout {
        requested: usize,
        separation: f64,
        extent: Extent,
    },

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
