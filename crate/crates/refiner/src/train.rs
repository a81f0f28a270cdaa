use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shiftfield_core::{mask_field, DisplacementField, LabelSet, LabelVolume, Volume};
use shiftfield_interp::{delaunay_build, linear_interpolate, tps_fit};
use shiftfield_keypoints::{attach_ground_truth, sample_keypoints};

use crate::augment::augment_with_prob;
use crate::model::RefinerModel;
use crate::{Adam, RefinerError, Result};

/// Which classical interpolator seeds the refiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Linear,
    Tps,
}

/// Training-loop knobs beyond the architecture config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda_reg: f64,
    pub lambda_tps: f64,
    pub m_keypoints: usize,
    /// When set, M is drawn uniformly from this inclusive range each
    /// iteration instead of staying fixed.
    pub randomize_m: Option<(usize, usize)>,
    pub method: InitMethod,
    pub augment_prob: f64,
    /// Normalize the image over the whole volume instead of the brain mask.
    pub normalize_global: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 5e-4,
            lambda_reg: 50.0,
            lambda_tps: 0.1,
            m_keypoints: 20,
            randomize_m: None,
            method: InitMethod::Tps,
            augment_prob: 0.5,
            normalize_global: false,
            seed: 0,
        }
    }
}

/// One in-memory training case: the (padded, if needed) phantom, its
/// ground-truth variants and the detected keypoint candidates.
#[derive(Debug, Clone)]
pub struct TrainCase {
    pub image: Volume,
    pub labels: LabelVolume,
    pub fields: Vec<DisplacementField>,
    pub candidates: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub cases: Vec<TrainCase>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub iterations: usize,
}

/// Standardizes an image for the network input: subtract the mean and divide
/// by the standard deviation, computed over the brain mask by default or the
/// whole volume in global mode.
pub fn normalize_image(img: &Volume, labels: &LabelVolume, global: bool) -> Volume {
    let data = img.data();
    let mask: Vec<bool> = if global {
        vec![true; data.len()]
    } else {
        labels.mask(LabelSet::BRAIN)
    };
    let mut n = 0usize;
    let mut mean = 0.0f64;
    for (v, &m) in data.iter().zip(&mask) {
        if m {
            mean += v;
            n += 1;
        }
    }
    let n = n.max(1);
    mean /= n as f64;
    let mut var = 0.0f64;
    for (v, &m) in data.iter().zip(&mask) {
        if m {
            var += (v - mean) * (v - mean);
        }
    }
    let std = (var / n as f64).sqrt().max(1e-12);
    let out: Vec<f64> = data.iter().map(|v| (v - mean) / std).collect();
    Volume::new(img.grid().clone(), out).expect("normalization keeps values finite")
}

/// Builds the dense initial field for a sampled keypoint set and masks it to
/// zero on background and skull.
pub fn build_initial_field(
    points: &[[f64; 3]],
    displacements: &[[f64; 3]],
    labels: &LabelVolume,
    method: InitMethod,
    lambda_tps: f64,
) -> Result<DisplacementField> {
    let grid = labels.grid();
    let field = match method {
        InitMethod::Tps => tps_fit(points, displacements, lambda_tps)?.evaluate(grid),
        InitMethod::Linear => {
            let tets = delaunay_build(points)?;
            // deduplication cannot trigger here: keypoint sets are distinct
            let displacements: Vec<[f64; 3]> = tets
                .kept_indices()
                .iter()
                .map(|&i| displacements[i])
                .collect();
            linear_interpolate(&tets, &displacements, grid)?
        }
    };
    Ok(mask_field(&field, labels, LabelSet::RIGID)?)
}

/// Applies a trained model to one case: normalize the image, run the
/// network, and re-mask the refined field to zero on background and skull.
pub fn refine_field(
    model: &RefinerModel,
    image: &Volume,
    labels: &LabelVolume,
    phi_init: &DisplacementField,
    normalize_global: bool,
) -> Result<DisplacementField> {
    let norm = normalize_image(image, labels, normalize_global);
    let (refined, _) = model.forward(&norm, phi_init)?;
    Ok(mask_field(&refined, labels, LabelSet::RIGID)?)
}

/// Supervised training: every iteration samples a case, a gravity variant
/// and a keypoint draw, builds the initial field on the fly, augments the
/// image, and takes one Adam step on the Jacobian-penalized loss. One epoch
/// is one pass-length of iterations (`cases.len()` draws); parameters are
/// checked finite after every epoch.
pub fn train(
    mut model: RefinerModel,
    set: &TrainSet,
    cfg: &TrainConfig,
) -> Result<(RefinerModel, TrainReport)> {
    if set.cases.is_empty() {
        return Err(RefinerError::EmptyTrainSet);
    }
    for case in &set.cases {
        if case.fields.is_empty() {
            return Err(RefinerError::EmptyTrainSet);
        }
        if case.candidates.is_empty() {
            return Err(RefinerError::KeypointSampling(
                "a training case has no keypoint candidates".into(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.lr, model.params());
    let mut grads = model.grad_pool();
    let iters_per_epoch = set.cases.len();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        iterations: 0,
    };

    for _epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0f64;
        for _ in 0..iters_per_epoch {
            let case = &set.cases[rng.random_range(0..set.cases.len())];
            let variant = rng.random_range(0..case.fields.len());
            let gt = &case.fields[variant];
            let m = match cfg.randomize_m {
                Some((lo, hi)) => rng.random_range(lo..=hi),
                None => cfg.m_keypoints,
            };

            // keypoint draw with retries against degenerate configurations
            let mut phi_init = None;
            for _attempt in 0..5 {
                let (points, _) = sample_keypoints(&case.candidates, m, &mut rng)?;
                let ks = attach_ground_truth(&points, gt)?;
                match build_initial_field(
                    ks.points(),
                    ks.displacements(),
                    &case.labels,
                    cfg.method,
                    cfg.lambda_tps,
                ) {
                    Ok(f) => {
                        phi_init = Some(f);
                        break;
                    }
                    Err(RefinerError::Interp(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            let phi_init = phi_init.ok_or_else(|| {
                RefinerError::KeypointSampling(format!(
                    "no non-degenerate draw of {m} keypoints in 5 attempts"
                ))
            })?;

            let image = augment_with_prob(&case.image, &mut rng, cfg.augment_prob);
            let norm = normalize_image(&image, &case.labels, cfg.normalize_global);

            let (pred, trace) = model.forward(&norm, &phi_init)?;
            let healthy = case.labels.mask(LabelSet::HEALTHY);
            let (loss, grad) =
                crate::loss::eq1_loss(&pred, gt, &healthy, cfg.lambda_reg)?;
            grads.zero();
            model.backward(&trace, &grad, &mut grads);
            adam.step(model.params_mut(), &grads);
            epoch_loss += loss.total;
            report.iterations += 1;
        }
        report.epoch_losses.push(epoch_loss / iters_per_epoch as f64);
        if !model.params().all_finite() {
            return Err(RefinerError::Diverged(format!(
                "non-finite parameters after epoch {}",
                model.epoch + 1
            )));
        }
        model.epoch += 1;
    }
    Ok((model, report))
}
