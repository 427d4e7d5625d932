//! Objectives, the optimizer, and the fitting loops.

pub mod adam;
pub mod config;
pub mod image;
pub mod loss;
pub mod regress;
pub mod sampling;
pub mod sdf;
pub mod shape_space;

pub use adam::{adam_step, AdamConfig, OptimState};
pub use config::{default_steps, validate_schedule, EncoderChoice, TrainConfig};
pub use image::{checkerboard, fit_image, render_image, ImageFitConfig};
pub use loss::{
    l1_regression_grad, l1_regression_loss, l2_grad, l2_image_loss, sdf_loss, sdf_loss_grad, sdf_loss_value,
    LossTerms, LossWeights, SdfBatch,
};
pub use regress::{regress_sdf, RegressConfig};
pub use sampling::sample_batches;
pub use sdf::{initialize, refine_to, train_sdf, train_sdf_from, StageSummary, TrainLog, TrainLogRow};
pub use shape_space::{fit_new_shape, train_shape_space, ShapeSpace, ShapeSpaceConfig};
