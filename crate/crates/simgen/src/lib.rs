//! Synthetic stand-in for a biomechanically simulated brain-shift dataset:
//! procedural phantoms (ellipsoidal brain, CSF rim, closed skull shell,
//! spherical tumor with an edema collar) and an analytic deformation
//! surrogate combining gravity sag along the surgical access direction with
//! cavity collapse around the tumor.
//!
//! Every generated ground-truth field is certified: it is exactly zero on
//! background and skull, and its Jacobian determinant is strictly positive
//! on all interior brain voxels (a global scale-back by bisection enforces
//! this when the raw field folds).

mod dataset;
mod deform;
mod error;
mod gravity;
mod phantom;

pub use dataset::{generate_dataset, generate_phantoms, simulate_fields};
pub use deform::simulate_deformation;
pub use error::SimError;
pub use gravity::{estimate_gravity, perturb_gravity};
pub use phantom::{check_phantom, make_phantom, Phantom};

use serde::{Deserialize, Serialize};

/// Deformation-simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Peak gravity sag in mm.
    pub sag_magnitude: f64,
    /// Spatial decay length of the sag around the craniotomy point, mm.
    pub sag_falloff: f64,
    /// Fraction of the tumor radius by which the cavity collapses inward.
    pub cavity_collapse: f64,
    /// Number of perturbed gravity variants per case.
    pub k_variants: usize,
    /// Maximum per-axis perturbation of the gravity direction, degrees.
    pub max_perturb_deg: f64,
    /// Dataset seed; per-case streams derive from it.
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            sag_magnitude: 2.8,
            sag_falloff: 7.5,
            cavity_collapse: 0.55,
            k_variants: 2,
            max_perturb_deg: 10.0,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sag_magnitude.is_finite() && self.sag_magnitude >= 0.0) {
            return Err(SimError::BadParams(format!(
                "sag_magnitude must be >= 0, got {}",
                self.sag_magnitude
            )));
        }
        if !(self.sag_falloff.is_finite() && self.sag_falloff > 0.0) {
            return Err(SimError::BadParams(format!(
                "sag_falloff must be > 0, got {}",
                self.sag_falloff
            )));
        }
        if !(0.0..=1.0).contains(&self.cavity_collapse) {
            return Err(SimError::BadParams(format!(
                "cavity_collapse must lie in [0, 1], got {}",
                self.cavity_collapse
            )));
        }
        if self.k_variants == 0 {
            return Err(SimError::BadParams("k_variants must be >= 1".into()));
        }
        if !(self.max_perturb_deg.is_finite() && self.max_perturb_deg >= 0.0) {
            return Err(SimError::BadParams(format!(
                "max_perturb_deg must be >= 0, got {}",
                self.max_perturb_deg
            )));
        }
        Ok(())
    }
}

/// Deterministic per-case RNG stream: mixes the dataset seed with the case
/// index so parallel and serial generation produce identical bytes.
pub(crate) fn case_seed(seed: u64, case: usize) -> u64 {
    let mut x = seed ^ (case as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

pub type Result<T> = std::result::Result<T, SimError>;
