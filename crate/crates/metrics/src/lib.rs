//! Quantitative evaluation of predicted displacement fields: field-space
//! errors (MSE, max error), warped-segmentation geometry (HD95), deformation
//! plausibility (share of non-positive Jacobian determinants) and paired
//! Wilcoxon significance testing.

mod distance;
mod error;
mod hd95;
mod jacobian_stats;
mod report;
mod wilcoxon;

pub use distance::{max_error, mse};
pub use error::MetricsError;
pub use hd95::{boundary_voxels, hd95};
pub use jacobian_stats::{pct_nonpositive_jacobian, JacobianCount};
pub use report::{evaluate_case, CaseReport};
pub use wilcoxon::{bonferroni, wilcoxon_signed_rank, WilcoxonResult};

pub type Result<T> = std::result::Result<T, MetricsError>;
