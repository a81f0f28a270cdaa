use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use shiftfield_core::{DisplacementField, GridSpec, LabelVolume, Volume};

use crate::{IoError, Result};

const MAGIC_VOLUME: &str = "SFV1";
const MAGIC_FIELD: &str = "SFF1";
const VOXEL_ORDER: &str = "row-major, H fastest";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    magic: String,
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    dtype: String,
    channels: u8,
    voxel_order: String,
}

impl Header {
    fn new(magic: &str, grid: &GridSpec, channels: u8) -> Self {
        Header {
            magic: magic.to_string(),
            dims: grid.dims(),
            spacing: grid.spacing(),
            origin: grid.origin(),
            dtype: "f32".to_string(),
            channels,
            voxel_order: VOXEL_ORDER.to_string(),
        }
    }
}

fn write_container(path: &Path, header: &Header, payload: &[f32]) -> Result<()> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header_bytes = serde_json::to_vec(header).map_err(|e| IoError::json(path, e))?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())
        .map_err(|e| IoError::io(path, e))?;
    w.write_all(&header_bytes).map_err(|e| IoError::io(path, e))?;
    let mut buf = Vec::with_capacity(payload.len() * 4);
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| IoError::io(path, e))?;
    w.flush().map_err(|e| IoError::io(path, e))?;
    Ok(())
}

fn read_container(path: &Path, expected_magic: &str) -> Result<(Header, Vec<f32>, GridSpec)> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes).map_err(|e| IoError::io(path, e))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes).map_err(|e| IoError::Header {
        path: path.into(),
        reason: format!("header claims {header_len} bytes but file ends early ({e})"),
        offset: 4,
    })?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| IoError::json(path, e))?;
    if header.magic != expected_magic {
        return Err(IoError::BadMagic {
            path: path.into(),
            expected: expected_magic.to_string(),
            found: header.magic,
            offset: 4,
        });
    }
    if header.dtype != "f32" || header.voxel_order != VOXEL_ORDER {
        return Err(IoError::Header {
            path: path.into(),
            reason: format!(
                "unsupported dtype {:?} or voxel order {:?}",
                header.dtype, header.voxel_order
            ),
            offset: 4,
        });
    }
    let payload_offset = 4 + header_len as u64;
    let grid = GridSpec::new(header.dims, header.spacing, header.origin).map_err(|e| {
        IoError::Header {
            path: path.into(),
            reason: e.to_string(),
            offset: 4,
        }
    })?;
    let expected = grid.voxel_count() * header.channels as usize * 4;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| IoError::io(path, e))?;
    if payload.len() != expected {
        return Err(IoError::Truncated {
            path: path.into(),
            expected,
            found: payload.len(),
            offset: payload_offset,
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, values, grid))
}

/// Writes a scalar volume; in-memory `f64` values round to `f32`.
pub fn write_volume(path: impl AsRef<Path>, vol: &Volume) -> Result<()> {
    let payload: Vec<f32> = vol.data().iter().map(|&v| v as f32).collect();
    write_container(
        path.as_ref(),
        &Header::new(MAGIC_VOLUME, vol.grid(), 1),
        &payload,
    )
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let (header, values, grid) = read_container(path.as_ref(), MAGIC_VOLUME)?;
    if header.channels != 1 {
        return Err(IoError::Header {
            path: path.as_ref().into(),
            reason: format!("volume must have 1 channel, found {}", header.channels),
            offset: 4,
        });
    }
    let data: Vec<f64> = values.into_iter().map(|v| v as f64).collect();
    Ok(Volume::new(grid, data)?)
}

/// Writes a displacement field, channel-interleaved `(dx, dy, dz)` per voxel.
pub fn write_field(path: impl AsRef<Path>, field: &DisplacementField) -> Result<()> {
    let mut payload = Vec::with_capacity(field.vectors().len() * 3);
    for v in field.vectors() {
        payload.push(v[0] as f32);
        payload.push(v[1] as f32);
        payload.push(v[2] as f32);
    }
    write_container(
        path.as_ref(),
        &Header::new(MAGIC_FIELD, field.grid(), 3),
        &payload,
    )
}

pub fn read_field(path: impl AsRef<Path>) -> Result<DisplacementField> {
    let (header, values, grid) = read_container(path.as_ref(), MAGIC_FIELD)?;
    if header.channels != 3 {
        return Err(IoError::Header {
            path: path.as_ref().into(),
            reason: format!("field must have 3 channels, found {}", header.channels),
            offset: 4,
        });
    }
    let vectors: Vec<[f64; 3]> = values
        .chunks_exact(3)
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    Ok(DisplacementField::new(grid, vectors)?)
}

/// Label volumes ride the scalar format with integer-valued voxels.
pub fn write_labels(path: impl AsRef<Path>, labels: &LabelVolume) -> Result<()> {
    let payload: Vec<f32> = labels.labels().iter().map(|&c| c as f32).collect();
    write_container(
        path.as_ref(),
        &Header::new(MAGIC_VOLUME, labels.grid(), 1),
        &payload,
    )
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let (_, values, grid) = read_container(path.as_ref(), MAGIC_VOLUME)?;
    let mut labels = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let rounded = v.round();
        if !(0.0..=5.0).contains(&rounded) || (v - rounded).abs() > 1e-6 {
            return Err(IoError::Header {
                path: path.as_ref().into(),
                reason: format!("voxel {i} value {v} is not a tissue code"),
                offset: 4,
            });
        }
        labels.push(rounded as u8);
    }
    Ok(LabelVolume::new(grid, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use shiftfield_core::TissueLabel;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("shiftfield-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn volume_round_trip_is_f32_exact() {
        let g = GridSpec::new([3, 4, 5], [0.7, 1.1, 0.9], [-2.0, 0.0, 4.0]).unwrap();
        let data: Vec<f64> = (0..g.voxel_count()).map(|i| (i as f64).sin() * 7.3).collect();
        let vol = Volume::new(g.clone(), data.clone()).unwrap();
        let path = tmp("vol.sfv");
        write_volume(&path, &vol).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back.grid(), &g);
        for (orig, got) in data.iter().zip(back.data()) {
            assert_eq!(*got, *orig as f32 as f64);
        }
    }

    #[test]
    fn field_round_trip_is_f32_exact() {
        let g = GridSpec::isotropic([4, 4, 4]).unwrap();
        let vectors: Vec<[f64; 3]> = (0..g.voxel_count())
            .map(|i| [i as f64 * 0.1, -(i as f64) * 0.2, (i as f64).cos()])
            .collect();
        let f = DisplacementField::new(g, vectors.clone()).unwrap();
        let path = tmp("field.sff");
        write_field(&path, &f).unwrap();
        let back = read_field(&path).unwrap();
        for (orig, got) in vectors.iter().zip(back.vectors()) {
            for c in 0..3 {
                assert_eq!(got[c], orig[c] as f32 as f64);
            }
        }
    }

    #[test]
    fn labels_round_trip() {
        let g = GridSpec::isotropic([3, 3, 3]).unwrap();
        let mut lv = vec![0u8; g.voxel_count()];
        lv[13] = 5;
        lv[4] = 3;
        let labels = LabelVolume::new(g, lv.clone()).unwrap();
        let path = tmp("labels.sfv");
        write_labels(&path, &labels).unwrap();
        let back = read_labels(&path).unwrap();
        assert_eq!(back.labels(), lv.as_slice());
        assert_eq!(back.get(1, 1, 1), TissueLabel::TumorCore.code());
    }

    #[test]
    fn wrong_magic_is_reported() {
        let g = GridSpec::isotropic([3, 3, 3]).unwrap();
        let vol = Volume::filled(g, 1.0).unwrap();
        let path = tmp("as_field.sfv");
        write_volume(&path, &vol).unwrap();
        match read_field(&path) {
            Err(IoError::BadMagic { expected, found, .. }) => {
                assert_eq!(expected, "SFF1");
                assert_eq!(found, "SFV1");
            }
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_byte_counts() {
        let g = GridSpec::isotropic([3, 3, 3]).unwrap();
        let vol = Volume::filled(g, 2.0).unwrap();
        let path = tmp("trunc.sfv");
        write_volume(&path, &vol).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        match read_volume(&path) {
            Err(IoError::Truncated {
                expected, found, ..
            }) => {
                assert_eq!(expected, 27 * 4);
                assert_eq!(found, 27 * 4 - 10);
            }
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn zero_dim_header_rejected() {
        let g = GridSpec::isotropic([3, 3, 3]).unwrap();
        let vol = Volume::filled(g, 0.0).unwrap();
        let path = tmp("badhdr.sfv");
        write_volume(&path, &vol).unwrap();
        // rewrite the header with a zero dim
        let bytes = std::fs::read(&path).unwrap();
        let hlen = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&bytes[4..4 + hlen]).unwrap();
        header["dims"] = serde_json::json!([0, 4, 4]);
        let new_header = serde_json::to_vec(&header).unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(&(new_header.len() as u32).to_le_bytes());
        out.extend_from_slice(&new_header);
        out.extend_from_slice(&bytes[4 + hlen..]);
        std::fs::write(&path, out).unwrap();
        assert!(matches!(read_volume(&path), Err(IoError::Header { .. })));
    }
}
