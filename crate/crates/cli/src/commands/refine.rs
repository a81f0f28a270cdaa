use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use shiftfield_io::Split;
use shiftfield_refiner::{load_checkpoint, refine_field};

use crate::commands::{
    configure_jobs, init_field_path, open_dataset, refined_field_path, reports_dir, select_cases,
};
use crate::pad::{pad_field, pad_labels, pad_volume, strip_field};
use crate::{CliError, Config, Result};

/// `refine`: applies a trained checkpoint to the initial fields of the
/// selected cases, padding inputs to the network's divisibility requirement
/// and stripping the padding from the outputs.
pub fn refine(
    config: &Config,
    manifest_path: &Path,
    checkpoint: &Path,
    split: Option<Split>,
) -> Result<()> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    if !checkpoint.exists() {
        return Err(CliError::MissingInput(checkpoint.to_path_buf()));
    }
    let model = load_checkpoint(checkpoint)?;
    let divisor = model.config.divisor();
    let method = config.method;
    let dir = root.join("refined").join(method.name());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::fs(&dir, e))?;

    let cases = select_cases(&manifest, split);
    let mut timings: Vec<(usize, f64)> = cases
        .par_iter()
        .map(|case| -> Result<(usize, f64)> {
            let init_path = init_field_path(&root, method.name(), case);
            if !init_path.exists() {
                return Err(CliError::MissingInput(init_path));
            }
            let phi_init = shiftfield_io::read_field(&init_path)?;
            let image = shiftfield_io::read_volume(root.join(&case.image))?;
            let labels = shiftfield_io::read_labels(root.join(&case.labels))?;
            let original_grid = phi_init.grid().clone();

            let image = pad_volume(&image, divisor)?;
            let labels = pad_labels(&labels, divisor)?;
            let phi_init = pad_field(&phi_init, divisor)?;
            let start = Instant::now();
            let refined = refine_field(&model, &image, &labels, &phi_init, config.normalize_global)?;
            let elapsed = start.elapsed().as_secs_f64();
            let refined = strip_field(&refined, &original_grid)?;
            shiftfield_io::write_field(refined_field_path(&root, method.name(), case), &refined)?;
            Ok((case.id, elapsed))
        })
        .collect::<Result<Vec<_>>>()?;
    timings.sort_by_key(|(id, _)| *id);

    let reports = reports_dir(&root);
    std::fs::create_dir_all(&reports).map_err(|e| CliError::fs(&reports, e))?;
    let timing_map: BTreeMap<String, f64> = timings
        .iter()
        .map(|(id, t)| (format!("case_{id:03}"), *t))
        .collect();
    let path = reports.join(format!("timings.refine.{}.json", method.name()));
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&timing_map)
            .map_err(|e| CliError::Config(format!("timings serialize: {e}")))?,
    )
    .map_err(|e| CliError::fs(&path, e))?;
    config.echo(&root, &format!("refine.{}", method.name()))?;

    let mean: f64 = timings.iter().map(|(_, t)| t).sum::<f64>() / timings.len().max(1) as f64;
    println!(
        "refine: {} fields via {} checkpoint ({:.1} ms/case)",
        timings.len(),
        method.name(),
        1e3 * mean
    );
    Ok(())
}
