use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shiftfield_core::LabelSet;
use shiftfield_io::Split;
use shiftfield_keypoints::{attach_ground_truth, sample_keypoints};
use shiftfield_metrics::mse;
use shiftfield_refiner::{build_initial_field, load_checkpoint, refine_field, RefinerModel};

use crate::commands::{
    chosen_variant, configure_jobs, load_or_detect_candidates, open_dataset, reports_dir,
    sampling_seed, select_cases,
};
use crate::pad::{pad_field, pad_labels, pad_volume, strip_field};
use crate::table::Table;
use crate::{CliError, Config, Method, Result};

/// Keypoint-count sweep: per-case brain MSE for every M and method, for the
/// classical baselines and (when checkpoints are given) the refined fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutput {
    pub m_values: Vec<usize>,
    pub cases: Vec<usize>,
    /// method -> per-M vector of per-case MSEs.
    pub baseline_mse: BTreeMap<String, Vec<Vec<f64>>>,
    /// method -> per-M vector of per-case MSEs, refined by the checkpoint.
    pub refined_mse: BTreeMap<String, Vec<Vec<f64>>>,
}

impl SweepOutput {
    pub fn baseline_means(&self, method: &str) -> Vec<f64> {
        self.baseline_mse[method]
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    }

    pub fn refined_means(&self, method: &str) -> Vec<f64> {
        self.refined_mse[method]
            .iter()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect()
    }
}

/// `sweep-m`: evaluates both interpolators over the keypoint-count grid on
/// the test split, refining with the matching checkpoint when provided.
pub fn sweep_m(
    config: &Config,
    manifest_path: &Path,
    checkpoints: &[(Method, &Path)],
    m_values: &[usize],
) -> Result<SweepOutput> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    let cases = select_cases(&manifest, Some(Split::Test));
    if cases.is_empty() {
        return Err(CliError::Config("no cases in the test split".into()));
    }
    let models: BTreeMap<&str, RefinerModel> = checkpoints
        .iter()
        .map(|(method, path)| -> Result<(&str, RefinerModel)> {
            if !path.exists() {
                return Err(CliError::MissingInput(path.to_path_buf()));
            }
            Ok((method.name(), load_checkpoint(path)?))
        })
        .collect::<Result<_>>()?;

    let mut baseline_mse: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut refined_mse: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();

    for method in [Method::Linear, Method::Tps] {
        let mut baseline_per_m = Vec::with_capacity(m_values.len());
        let mut refined_per_m = Vec::with_capacity(m_values.len());
        for &m in m_values {
            let mut rows: Vec<(usize, f64, Option<f64>)> = cases
                .par_iter()
                .map(|case| -> Result<(usize, f64, Option<f64>)> {
                    let image = shiftfield_io::read_volume(root.join(&case.image))?;
                    let labels = shiftfield_io::read_labels(root.join(&case.labels))?;
                    let candidates = load_or_detect_candidates(
                        &root,
                        case,
                        &image,
                        &labels,
                        config.contrast_threshold_frac,
                    )?;
                    let variant = chosen_variant(config.seed, case.id, case.variants.len());
                    let gt = shiftfield_io::read_field(root.join(&case.variants[variant].field))?;
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(sampling_seed(config.seed, case.id, m));
                    let (points, _) = sample_keypoints(&candidates, m, &mut rng)?;
                    let set = attach_ground_truth(&points, &gt)?;
                    let init = build_initial_field(
                        set.points(),
                        set.displacements(),
                        &labels,
                        method.as_init(),
                        config.lambda_tps,
                    )?;
                    let brain = labels.mask(LabelSet::BRAIN);
                    let base = mse(&init, &gt, &brain)?;
                    let refined = match models.get(method.name()) {
                        Some(model) => {
                            let divisor = model.config.divisor();
                            let image_p = pad_volume(&image, divisor)?;
                            let labels_p = pad_labels(&labels, divisor)?;
                            let init_p = pad_field(&init, divisor)?;
                            let out = refine_field(
                                model,
                                &image_p,
                                &labels_p,
                                &init_p,
                                config.normalize_global,
                            )?;
                            let out = strip_field(&out, init.grid())?;
                            Some(mse(&out, &gt, &brain)?)
                        }
                        None => None,
                    };
                    Ok((case.id, base, refined))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.sort_by_key(|(id, _, _)| *id);
            baseline_per_m.push(rows.iter().map(|(_, b, _)| *b).collect::<Vec<_>>());
            let refined: Vec<f64> = rows.iter().filter_map(|(_, _, r)| *r).collect();
            refined_per_m.push(refined);
        }
        baseline_mse.insert(method.name().to_string(), baseline_per_m);
        if models.contains_key(method.name()) {
            refined_mse.insert(method.name().to_string(), refined_per_m);
        }
    }

    let output = SweepOutput {
        m_values: m_values.to_vec(),
        cases: cases.iter().map(|c| c.id).collect(),
        baseline_mse,
        refined_mse,
    };
    let reports = reports_dir(&root);
    std::fs::create_dir_all(&reports).map_err(|e| CliError::fs(&reports, e))?;
    let path = reports.join("sweep_m.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&output)
            .map_err(|e| CliError::Config(format!("sweep serialize: {e}")))?,
    )
    .map_err(|e| CliError::fs(&path, e))?;
    config.echo(&root, "sweep-m")?;

    // trend table: brain MSE means per M
    let mut header: Vec<String> = vec!["Method".into()];
    header.extend(m_values.iter().map(|m| format!("M={m}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&header_refs);
    for method in ["linear", "tps"] {
        let means = output.baseline_means(method);
        let mut row = vec![format!("{method} (baseline)")];
        row.extend(means.iter().map(|v| format!("{v:.3}")));
        table.row(row);
        if output.refined_mse.contains_key(method) {
            let means = output.refined_means(method);
            let mut row = vec![format!("{method} (refined)")];
            row.extend(means.iter().map(|v| format!("{v:.3}")));
            table.row(row);
        }
    }
    println!("{}", table.render());
    Ok(output)
}
