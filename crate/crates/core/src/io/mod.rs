//! Frame dataset files, point CSV export and feature tables.

pub mod frames;
pub mod table;

use thiserror::Error;

pub use frames::{
    read_frames, write_frames, decode_frames, encode_frames, write_points_csv, FrameFile, FrameRecord, FRAME_MAGIC,
};
pub use table::{read_feature_table, write_feature_table, FeatureRow, TABLE_COLUMNS};

use crate::cloud::CloudError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic at byte 0: expected \"LWPC1\"")]
    BadMagic,
    #[error("truncated file: expected at least {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("corrupt data at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("invalid point at byte {offset}: {source}")]
    InvalidPoint { offset: usize, source: CloudError },
    #[error("frames disagree on the sensor descriptor")]
    MixedSensors,
    #[error("feature table line {line}: {reason}")]
    Table { line: u64, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
