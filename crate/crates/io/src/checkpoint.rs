use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{IoError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Checkpoint container header. The model config rides along as opaque JSON
/// so this crate stays independent of the network definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: serde_json::Value,
    pub params: Vec<ParamSpec>,
    pub seed: u64,
    pub epoch: usize,
}

/// Writes a checkpoint: 4-byte little-endian header length, JSON header,
/// then one little-endian `f64` blob per parameter in header order.
pub fn write_checkpoint(
    path: impl AsRef<Path>,
    header: &CheckpointHeader,
    blobs: &[Vec<f64>],
) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(header.params.len(), blobs.len(), "one blob per param spec");
    for (spec, blob) in header.params.iter().zip(blobs) {
        let want: usize = spec.shape.iter().product();
        assert_eq!(
            blob.len(),
            want,
            "blob for {} does not match its shape",
            spec.name
        );
    }
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header_bytes = serde_json::to_vec(header).map_err(|e| IoError::json(path, e))?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())
        .map_err(|e| IoError::io(path, e))?;
    w.write_all(&header_bytes).map_err(|e| IoError::io(path, e))?;
    for blob in blobs {
        let mut buf = Vec::with_capacity(blob.len() * 8);
        for v in blob {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| IoError::io(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes).map_err(|e| IoError::io(path, e))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|e| IoError::io(path, e))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&header_bytes).map_err(|e| IoError::json(path, e))?;
    let mut blobs = Vec::with_capacity(header.params.len());
    let mut offset = 4 + header_len;
    for spec in &header.params {
        let len: usize = spec.shape.iter().product();
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf).map_err(|_| IoError::Truncated {
            path: path.into(),
            expected: len * 8,
            found: 0,
            offset: offset as u64,
        })?;
        offset += len * 8;
        blobs.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        );
    }
    Ok((header, blobs))
}
