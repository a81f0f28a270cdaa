//! The trainable residual interpolation refiner.
//!
//! A volumetric encoder–decoder (residual blocks with concurrent spatial and
//! channel squeeze-and-excitation, instance norm, LeakyReLU, max-pool
//! downsampling, transposed-conv upsampling, summation skips) predicts a
//! residual correction `ε` so that the refined field is `φ_init + ε`. The
//! net is trained with a voxel-wise squared error plus a penalty on negative
//! Jacobian determinants over healthy tissue, differentiated in closed form
//! through the same finite-difference stencils the forward metric uses.
//!
//! Everything runs in `f64` on the CPU with hand-written forward and
//! backward passes; gradient correctness is pinned by central-difference
//! checks per layer and through the composed network.

mod adam;
mod augment;
mod error;
mod layers;
mod loss;
mod model;
mod tensor;
mod train;

pub use adam::Adam;
pub use augment::{augment, augment_with_prob};
pub use error::RefinerError;
pub use layers::{
    leaky_relu, leaky_relu_backward, Conv3d, InstanceNorm, MaxPool3d, ScSe, TransposedConv3d,
};
pub use loss::{eq1_loss, LossBreakdown};
pub use model::{
    load_checkpoint, save_checkpoint, GradPool, ParamPool, RefinerConfig, RefinerModel,
};
pub use tensor::Tensor4;
pub use train::{
    build_initial_field, normalize_image, refine_field, train, InitMethod, TrainCase,
    TrainConfig, TrainReport, TrainSet,
};

pub type Result<T> = std::result::Result<T, RefinerError>;
