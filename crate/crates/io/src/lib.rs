//! On-disk formats for the pipeline.
//!
//! Volumes and fields use a minimal container: a 4-byte little-endian
//! header length, a JSON header, then a little-endian `f32` payload
//! (channel-interleaved for fields). Keypoint sets are JSON arrays of
//! `{x: [3], d: [3]}` in mm. Dataset manifests and model checkpoints are
//! JSON (the checkpoint with trailing little-endian `f64` parameter blobs
//! in header order). In-memory math is `f64`; scalar and field payloads
//! round to `f32` on write, and reads reproduce those `f32` values exactly.

mod checkpoint;
mod error;
mod format;
mod keypoints_json;
mod manifest;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, ParamSpec};
pub use error::IoError;
pub use format::{
    read_field, read_labels, read_volume, write_field, write_labels, write_volume,
};
pub use keypoints_json::{read_keypoints, write_keypoints};
pub use manifest::{CaseEntry, Manifest, Split, VariantEntry};

pub type Result<T> = std::result::Result<T, IoError>;
