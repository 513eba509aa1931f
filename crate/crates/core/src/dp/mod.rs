//! DP-SGD with an optional per-layer denoising hook.
//!
//! One step: per-example gradients, clipping to norm `C`, summation, Gaussian
//! noise with standard deviation `sigma * C` per entry, division by the
//! realised batch size, optional denoising, optimizer update.

mod improvement;
mod mechanism;
mod optimizer;
mod partition;
mod step;

pub use improvement::{cosine, improvement_metric, ImprovementRecord, LayerImprovement};
pub use mechanism::{
    clip_gradient, draw_noise, effective_sigma, noisy_aggregate, poisson_sample, sum_gradients,
    PrivacyMechanismConfig,
};
pub use optimizer::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use partition::{
    denoise_partition, GradientPartition, LayerDenoise, LayerRole, LayerSpec, PartitionLayout,
};
pub use step::{dp_sgd_step, sgd_step, Example, Model, StepOutcome};
