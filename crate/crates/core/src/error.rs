use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed PLY: {0}")]
    Ply(String),

    #[error("PLY property `{0}` not found")]
    MissingProperty(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("coordinate {value} exceeds the {bits}-bit geometry range")]
    CoordinateOverflow { value: u64, bits: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bitstream underrun")]
    Underrun,

    #[error("corrupt bitstream: {0}")]
    Corrupt(String),

    #[error("geometry has {actual} points but the bitstream encodes {expected}")]
    CountMismatch { expected: u64, actual: u64 },
}
