//! Classical sparse-to-dense interpolators for matched-keypoint
//! displacements: regularized 3D thin-plate splines and piecewise-linear
//! interpolation over a Delaunay tetrahedralization.
//!
//! Both take a sparse set of control points with displacement vectors (mm,
//! world coordinates) and produce a dense [`shiftfield_core::DisplacementField`]
//! on a voxel grid. Voxels outside the convex hull (Delaunay) get the zero
//! vector; downstream masking zeroes background and skull either way.

mod delaunay;
mod error;
mod linear;
mod solve;
mod tps;

pub use delaunay::{delaunay_build, Tetrahedralization};
pub use error::InterpError;
pub use linear::linear_interpolate;
pub use solve::solve_lu;
pub use tps::{tps_fit, TpsModel};

pub type Result<T> = std::result::Result<T, InterpError>;
