use std::path::{Path, PathBuf};

use rayon::prelude::*;
use shiftfield_io::Split;
use shiftfield_refiner::{
    save_checkpoint, RefinerModel, TrainCase, TrainConfig, TrainSet,
};

use crate::commands::{configure_jobs, load_or_detect_candidates, open_dataset, reports_dir};
use crate::pad::{pad_field, pad_labels, pad_volume};
use crate::{CliError, Config, Result};

/// `train`: fits the refiner on the train split. Volumes whose dims are not
/// divisible by the network's downsampling factor are zero-padded at load;
/// the padding amount is recorded in the training report.
pub fn train(config: &Config, manifest_path: &Path, out: Option<PathBuf>) -> Result<PathBuf> {
    configure_jobs(config.jobs);
    let (manifest, root) = open_dataset(manifest_path)?;
    let divisor = config.refiner.divisor();
    let original_dims = manifest.grid.dims();
    let padded_dims = crate::pad::padded_dims(original_dims, divisor);

    let train_cases: Vec<_> = manifest.split(Split::Train).collect();
    if train_cases.is_empty() {
        return Err(CliError::Config(
            "manifest has no cases in the train split".into(),
        ));
    }
    let cases: Vec<TrainCase> = train_cases
        .par_iter()
        .map(|case| -> Result<TrainCase> {
            let image = shiftfield_io::read_volume(root.join(&case.image))?;
            let labels = shiftfield_io::read_labels(root.join(&case.labels))?;
            let candidates = load_or_detect_candidates(
                &root,
                case,
                &image,
                &labels,
                config.contrast_threshold_frac,
            )?;
            let mut fields = Vec::with_capacity(case.variants.len());
            for variant in &case.variants {
                let f = shiftfield_io::read_field(root.join(&variant.field))?;
                fields.push(pad_field(&f, divisor)?);
            }
            if fields.is_empty() {
                return Err(CliError::MissingInput(root.join(format!(
                    "case_{:03}: no fields; run `simulate` first",
                    case.id
                ))));
            }
            Ok(TrainCase {
                image: pad_volume(&image, divisor)?,
                labels: pad_labels(&labels, divisor)?,
                fields,
                candidates,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let set = TrainSet { cases };
    let model = RefinerModel::new(config.refiner.clone())?;
    let train_cfg = TrainConfig {
        epochs: config.refiner.epochs,
        lr: config.refiner.lr,
        lambda_reg: config.refiner.lambda_reg,
        lambda_tps: config.lambda_tps,
        m_keypoints: config.m_keypoints,
        randomize_m: config.randomize_m,
        method: config.method.as_init(),
        augment_prob: config.augment_prob,
        normalize_global: config.normalize_global,
        seed: config.seed,
    };
    let (trained, report) = shiftfield_refiner::train(model, &set, &train_cfg)?;

    let ckpt = out.unwrap_or_else(|| {
        root.join("checkpoints")
            .join(format!("{}.ckpt", config.method.name()))
    });
    if let Some(parent) = ckpt.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::fs(parent, e))?;
    }
    save_checkpoint(&trained, &ckpt)?;

    let reports = reports_dir(&root);
    std::fs::create_dir_all(&reports).map_err(|e| CliError::fs(&reports, e))?;
    let summary = serde_json::json!({
        "method": config.method.name(),
        "epochs": report.epoch_losses.len(),
        "iterations": report.iterations,
        "epoch_losses": report.epoch_losses,
        "original_dims": original_dims,
        "padded_dims": padded_dims,
        "checkpoint": ckpt.display().to_string(),
    });
    let report_path = reports.join(format!("train.{}.json", config.method.name()));
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Config(format!("report serialize: {e}")))?,
    )
    .map_err(|e| CliError::fs(&report_path, e))?;
    config.echo(&root, &format!("train.{}", config.method.name()))?;

    println!(
        "train: {} epochs on {} cases, loss {:.4} -> {:.4}, checkpoint {}",
        report.epoch_losses.len(),
        set.cases.len(),
        report.epoch_losses.first().copied().unwrap_or(f64::NAN),
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        ckpt.display()
    );
    Ok(ckpt)
}
