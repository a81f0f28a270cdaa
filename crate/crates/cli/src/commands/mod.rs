//! Subcommand implementations. Each takes a resolved [`Config`] plus its
//! specific inputs, works relative to the dataset root (the manifest's
//! directory), and echoes the config beside its outputs.

mod dataset;
mod eval;
mod interpolate;
mod keypoints;
mod refine;
mod sweep;
mod train;

pub use dataset::{phantom, simulate};
pub use eval::{eval, EvalOutput};
pub use interpolate::interpolate;
pub use keypoints::keypoints;
pub use refine::refine;
pub use sweep::{sweep_m, SweepOutput};
pub use train::train;

use std::path::{Path, PathBuf};

use shiftfield_io::{CaseEntry, Manifest, Split};

use crate::{CliError, Result};

/// Deterministic pick of one gravity variant per case, used consistently by
/// the keypoint, interpolation and evaluation stages.
pub fn chosen_variant(seed: u64, case_id: usize, k: usize) -> usize {
    let mut x = seed ^ ((case_id as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
    x ^= x >> 29;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 32;
    (x % k.max(1) as u64) as usize
}

/// Seed for the keypoint draw of one case at one keypoint count.
pub fn sampling_seed(seed: u64, case_id: usize, m: usize) -> u64 {
    let mut x = seed
        .wrapping_add((case_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((m as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x
}

pub fn keypoints_path(root: &Path, case: &CaseEntry) -> PathBuf {
    root.join("keypoints").join(format!("case_{:03}.json", case.id))
}

pub fn candidates_path(root: &Path, case: &CaseEntry) -> PathBuf {
    root.join("keypoints")
        .join(format!("candidates_case_{:03}.json", case.id))
}

pub fn init_field_path(root: &Path, method: &str, case: &CaseEntry) -> PathBuf {
    root.join("init")
        .join(method)
        .join(format!("case_{:03}.sff", case.id))
}

pub fn refined_field_path(root: &Path, method: &str, case: &CaseEntry) -> PathBuf {
    root.join("refined")
        .join(method)
        .join(format!("case_{:03}.sff", case.id))
}

pub fn reports_dir(root: &Path) -> PathBuf {
    root.join("reports")
}

/// Loads the manifest and returns it with its directory.
pub fn open_dataset(manifest_path: &Path) -> Result<(Manifest, PathBuf)> {
    if !manifest_path.exists() {
        return Err(CliError::MissingInput(manifest_path.to_path_buf()));
    }
    let manifest = Manifest::load(manifest_path)?;
    let root = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok((manifest, root))
}

/// Cases selected by an optional split filter.
pub fn select_cases<'m>(manifest: &'m Manifest, split: Option<Split>) -> Vec<&'m CaseEntry> {
    manifest
        .cases
        .iter()
        .filter(|c| split.map(|s| c.split == s).unwrap_or(true))
        .collect()
}

/// Installs the rayon pool size once per process when `--jobs` is given.
pub fn configure_jobs(jobs: usize) {
    if jobs > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

/// Reads candidate keypoints from the cache written by the `keypoints`
/// command, or detects them fresh from the image.
pub fn load_or_detect_candidates(
    root: &Path,
    case: &CaseEntry,
    image: &shiftfield_core::Volume,
    labels: &shiftfield_core::LabelVolume,
    contrast_frac: f64,
) -> Result<Vec<[f64; 3]>> {
    let cache = candidates_path(root, case);
    if cache.exists() {
        let text = std::fs::read_to_string(&cache).map_err(|e| CliError::fs(&cache, e))?;
        let pts: Vec<[f64; 3]> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("candidates cache {}: {e}", cache.display())))?;
        return Ok(pts);
    }
    Ok(detect_candidates(image, labels, contrast_frac))
}

pub fn detect_candidates(
    image: &shiftfield_core::Volume,
    labels: &shiftfield_core::LabelVolume,
    contrast_frac: f64,
) -> Vec<[f64; 3]> {
    let mask = labels.mask(shiftfield_core::LabelSet::BRAIN);
    let (lo, hi) = image.min_max();
    let threshold = contrast_frac * (hi - lo);
    shiftfield_keypoints::detect_keypoints(image, &mask, threshold)
}
