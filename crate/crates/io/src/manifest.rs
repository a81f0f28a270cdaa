use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shiftfield_core::GridSpec;

use crate::{IoError, Result};

/// Dataset split assignment, 75:10:15 by case count (rounded half up for
/// train and validation, remainder to test).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    /// Split labels for `n` cases in order: train block, then val, then test.
    pub fn assign(n: usize) -> Vec<Split> {
        let train = (0.75 * n as f64 + 0.5).floor() as usize;
        let val = (0.10 * n as f64 + 0.5).floor() as usize;
        let train = train.min(n);
        let val = val.min(n - train);
        let mut out = vec![Split::Train; train];
        out.extend(std::iter::repeat(Split::Val).take(val));
        out.extend(std::iter::repeat(Split::Test).take(n - train - val));
        out
    }
}

/// One simulated gravity variant of a case: the (possibly perturbed) gravity
/// direction and the ground-truth field it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantEntry {
    pub gravity: [f64; 3],
    pub field: PathBuf,
}

/// One phantom case with its simulated deformation variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: usize,
    pub seed: u64,
    pub image: PathBuf,
    pub labels: PathBuf,
    pub tumor_center: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_gravity: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantEntry>,
    pub split: Split,
}

/// Dataset manifest: generation seed, grid, simulation parameters (opaque
/// JSON owned by the generator) and the case list. All paths are relative to
/// the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub grid: GridSpec,
    pub sim_params: serde_json::Value,
    pub cases: Vec<CaseEntry>,
}

impl Manifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| IoError::json(path.as_ref(), e))?;
        std::fs::write(path.as_ref(), json).map_err(|e| IoError::io(path.as_ref(), e))
    }

    /// Loads a manifest and verifies that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| IoError::io(path.as_ref(), e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| IoError::json(path.as_ref(), e))?;
        let root = path.as_ref().parent().unwrap_or(Path::new("."));
        for case in &manifest.cases {
            for rel in [&case.image, &case.labels] {
                let p = root.join(rel);
                if !p.exists() {
                    return Err(IoError::MissingFile { path: p });
                }
            }
            for variant in &case.variants {
                let p = root.join(&variant.field);
                if !p.exists() {
                    return Err(IoError::MissingFile { path: p });
                }
            }
        }
        Ok(manifest)
    }

    /// Cases carrying the given split label.
    pub fn split(&self, split: Split) -> impl Iterator<Item = &CaseEntry> {
        self.cases.iter().filter(move |c| c.split == split)
    }
}
