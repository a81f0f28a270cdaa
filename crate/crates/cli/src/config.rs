use std::path::Path;

use serde::{Deserialize, Serialize};
use shiftfield_refiner::{InitMethod, RefinerConfig};
use shiftfield_simgen::SimParams;

use crate::{CliError, Result};

/// Interpolation method selector shared by the CLI surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Tps,
}

impl Method {
    pub fn as_init(self) -> InitMethod {
        match self {
            Method::Linear => InitMethod::Linear,
            Method::Tps => InitMethod::Tps,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Tps => "tps",
        }
    }
}

/// Fully-resolved pipeline configuration. Every value has an embedded
/// default, a JSON config file overrides the defaults, and command-line
/// flags override the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Master seed; every stage derives its streams from it.
    pub seed: u64,
    /// Dataset grid dims (D, W, H).
    pub dims: [usize; 3],
    /// Voxel spacing in mm.
    pub spacing: [f64; 3],
    pub n_cases: usize,
    /// Deformation simulator parameters (K variants, sag, collapse, ...).
    pub sim: SimParams,
    /// Number of keypoints sampled per case.
    pub m_keypoints: usize,
    /// Detector threshold as a fraction of the image intensity range.
    pub contrast_threshold_frac: f64,
    /// TPS regularization weight.
    pub lambda_tps: f64,
    /// Interpolator used for initial fields.
    pub method: Method,
    /// Network architecture and optimization settings.
    pub refiner: RefinerConfig,
    /// Probability of each image augmentation during training.
    pub augment_prob: f64,
    /// Draw M uniformly from this range during training instead of fixing it.
    pub randomize_m: Option<(usize, usize)>,
    /// Normalize images over the full volume instead of the brain mask.
    pub normalize_global: bool,
    /// Worker threads (0 = rayon default).
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            dims: [48, 48, 48],
            spacing: [1.0, 1.0, 1.0],
            n_cases: 10,
            sim: SimParams::default(),
            m_keypoints: 20,
            contrast_threshold_frac: 0.02,
            lambda_tps: 0.1,
            method: Method::Tps,
            refiner: RefinerConfig::default(),
            augment_prob: 0.5,
            randomize_m: None,
            normalize_global: false,
            jobs: 0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    /// Writes the fully-resolved config beside a command's outputs.
    pub fn echo(&self, dir: &Path, command: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::fs(dir, e))?;
        let path = dir.join(format!("config.{command}.json"));
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("config serialization: {e}")))?;
        std::fs::write(&path, json).map_err(|e| CliError::fs(path, e))
    }

    pub fn grid(&self) -> Result<shiftfield_core::GridSpec> {
        Ok(shiftfield_core::GridSpec::new(
            self.dims,
            self.spacing,
            [0.0; 3],
        )?)
    }

    /// Synchronizes seeds: the master seed feeds the simulator and the
    /// refiner unless those were overridden separately.
    pub fn propagate_seed(&mut self) {
        self.sim.seed = self.seed;
        self.refiner.seed = self.seed;
    }
}
