//! Salient-point detection on volumetric images and pairing with
//! ground-truth displacements.
//!
//! The detector is the core of a 3D SIFT front end: a Gaussian scale-space
//! per octave, difference-of-Gaussians volumes, and strict extrema over the
//! 3×3×3×3 space-scale neighborhood. Descriptors and matching are not needed
//! here — synthetic ground truth supplies exact correspondences, so detected
//! points are sampled uniformly and paired by sampling the true field.

mod detect;
mod sample;
mod scale_space;
mod set;

pub use detect::{default_contrast_threshold, detect_keypoints};
pub use sample::{attach_ground_truth, sample_keypoints};
pub use scale_space::gaussian_blur;
pub use set::{KeypointError, KeypointSet};

pub type Result<T> = std::result::Result<T, KeypointError>;
