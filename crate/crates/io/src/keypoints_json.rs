use std::path::Path;

use serde::{Deserialize, Serialize};
use shiftfield_core::GridSpec;
use shiftfield_keypoints::KeypointSet;

use crate::{IoError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    x: [f64; 3],
    d: [f64; 3],
}

/// Writes a keypoint set as a JSON list of `{x: [3], d: [3]}` in mm.
pub fn write_keypoints(path: impl AsRef<Path>, set: &KeypointSet) -> Result<()> {
    let entries: Vec<Entry> = set
        .points()
        .iter()
        .zip(set.displacements())
        .map(|(x, d)| Entry { x: *x, d: *d })
        .collect();
    let json = serde_json::to_string_pretty(&entries)
        .map_err(|e| IoError::json(path.as_ref(), e))?;
    std::fs::write(path.as_ref(), json).map_err(|e| IoError::io(path.as_ref(), e))
}

/// Reads a keypoint set back; the grid (not stored in the file) comes from
/// the dataset manifest.
pub fn read_keypoints(path: impl AsRef<Path>, grid: &GridSpec) -> Result<KeypointSet> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| IoError::io(path.as_ref(), e))?;
    let entries: Vec<Entry> =
        serde_json::from_str(&text).map_err(|e| IoError::json(path.as_ref(), e))?;
    let (points, displacements) = entries.into_iter().map(|e| (e.x, e.d)).unzip();
    Ok(KeypointSet::new(points, displacements, grid.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keypoints_round_trip() {
        let g = GridSpec::isotropic([8, 8, 8]).unwrap();
        let set = KeypointSet::new(
            vec![[1.0, 2.0, 3.0], [4.5, 5.5, 6.5]],
            vec![[0.1, -0.2, 0.3], [0.0, 0.0, 1.0]],
            g.clone(),
        )
        .unwrap();
        let path = std::env::temp_dir().join("shiftfield-kp-test.json");
        write_keypoints(&path, &set).unwrap();
        let back = read_keypoints(&path, &g).unwrap();
        assert_eq!(back, set);
    }
}
