use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shiftfield_keypoints::{attach_ground_truth, sample_keypoints};

use crate::commands::{
    candidates_path, chosen_variant, configure_jobs, detect_candidates, keypoints_path,
    open_dataset, sampling_seed,
};
use crate::{CliError, Config, Result};

/// `keypoints`: detects candidates per case, samples M of them, pairs them
/// with the chosen ground-truth variant and writes both the keypoint set and
/// a candidates cache.
pub fn keypoints(config: &Config, manifest_path: &Path) -> Result<()> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    let dir = root.join("keypoints");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::fs(&dir, e))?;

    let warnings: Vec<(usize, usize)> = manifest
        .cases
        .par_iter()
        .map(|case| -> Result<Option<(usize, usize)>> {
            let image = shiftfield_io::read_volume(root.join(&case.image))?;
            let labels = shiftfield_io::read_labels(root.join(&case.labels))?;
            let candidates = detect_candidates(&image, &labels, config.contrast_threshold_frac);
            // cache the full candidate list for the training stage
            let cache = candidates_path(&root, case);
            let json = serde_json::to_string(&candidates)
                .map_err(|e| CliError::Config(format!("candidates serialize: {e}")))?;
            std::fs::write(&cache, json).map_err(|e| CliError::fs(&cache, e))?;

            if case.variants.is_empty() {
                return Err(CliError::MissingInput(root.join(format!(
                    "case_{:03} has no simulated fields; run `simulate` first",
                    case.id
                ))));
            }
            let variant = chosen_variant(config.seed, case.id, case.variants.len());
            let field = shiftfield_io::read_field(root.join(&case.variants[variant].field))?;
            let mut rng =
                ChaCha8Rng::seed_from_u64(sampling_seed(config.seed, case.id, config.m_keypoints));
            let (points, truncated) =
                sample_keypoints(&candidates, config.m_keypoints, &mut rng)?;
            let set = attach_ground_truth(&points, &field)?;
            shiftfield_io::write_keypoints(keypoints_path(&root, case), &set)?;
            Ok(truncated.then_some((case.id, candidates.len())))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    for (id, n) in &warnings {
        eprintln!(
            "warning: case {id} has only {n} candidates (< {}); using all of them",
            config.m_keypoints
        );
    }
    config.echo(&root, "keypoints")?;
    println!(
        "keypoints: wrote {} sets (M = {})",
        manifest.cases.len(),
        config.m_keypoints
    );
    Ok(())
}
