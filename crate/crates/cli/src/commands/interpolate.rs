use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use shiftfield_io::Split;
use shiftfield_refiner::build_initial_field;

use crate::commands::{
    configure_jobs, init_field_path, keypoints_path, open_dataset, reports_dir, select_cases,
};
use crate::{CliError, Config, Result};

/// `interpolate`: reads each case's keypoint set, runs the configured
/// classical interpolator, applies the background/skull masking rule and
/// writes the dense initial field. Wall time per case lands in a separate
/// timings report so evaluation artifacts stay byte-deterministic.
pub fn interpolate(config: &Config, manifest_path: &Path, split: Option<Split>) -> Result<()> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    let method = config.method;
    let dir = root.join("init").join(method.name());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::fs(&dir, e))?;

    let cases = select_cases(&manifest, split);
    let mut timings: Vec<(usize, f64)> = cases
        .par_iter()
        .map(|case| -> Result<(usize, f64)> {
            let kp_path = keypoints_path(&root, case);
            if !kp_path.exists() {
                return Err(CliError::MissingInput(kp_path));
            }
            let set = shiftfield_io::read_keypoints(&kp_path, &manifest.grid)?;
            let labels = shiftfield_io::read_labels(root.join(&case.labels))?;
            let start = Instant::now();
            let field = build_initial_field(
                set.points(),
                set.displacements(),
                &labels,
                method.as_init(),
                config.lambda_tps,
            )?;
            let elapsed = start.elapsed().as_secs_f64();
            shiftfield_io::write_field(init_field_path(&root, method.name(), case), &field)?;
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
    let path = reports.join(format!("timings.interpolate.{}.json", method.name()));
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&timing_map)
            .map_err(|e| CliError::Config(format!("timings serialize: {e}")))?,
    )
    .map_err(|e| CliError::fs(&path, e))?;

    config.echo(&root, &format!("interpolate.{}", method.name()))?;
    let mean: f64 = timings.iter().map(|(_, t)| t).sum::<f64>() / timings.len().max(1) as f64;
    println!(
        "interpolate: {} fields via {} ({:.1} ms/case)",
        timings.len(),
        method.name(),
        1e3 * mean
    );
    Ok(())
}
